fn main() {
    std::process::exit(queue_kpi::cli::run(std::env::args_os()));
}
