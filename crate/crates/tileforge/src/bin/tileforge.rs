fn main() {
    println!("tileforge");
}
