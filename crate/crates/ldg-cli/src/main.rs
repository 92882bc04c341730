fn main() {
    println!("ldg placeholder");
}
