fn main() {
    eprintln!("truncpoly CLI: not yet implemented");
    std::process::exit(2);
}
