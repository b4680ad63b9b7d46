fn main() {
    eprintln!("nilphase CLI: not wired up yet");
    std::process::exit(2);
}
