fn main() {
    std::process::exit(ppgn::cli::run(std::env::args_os()));
}
