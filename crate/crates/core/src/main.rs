use std::io::Write;

fn main() {
    let out = gibbs_spectra::cli::run_from_args(std::env::args_os());
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    let _ = std::io::stdout().flush();
    std::process::exit(out.exit_code);
}
