fn main() {
    let code = match hsag_cli::cli_main(std::env::args_os()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            hsag_cli::exit_code(&e)
        }
    };
    std::process::exit(code);
}
