fn main() {
    println!("qfaap");
}
