fn main() {
    std::process::exit(seqlink_cli::run(std::env::args_os()));
}
