fn main() {
    std::process::exit(mihs_bench::cli::run(std::env::args_os()));
}
