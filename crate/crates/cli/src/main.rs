fn main() {
    println!("soundfield");
}
