use clap::Parser;
use rowcrop_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = rowcrop_cli::run(&cli) {
        eprintln!("rowcrop: {e}");
        eprintln!("{}", e.to_json());
        std::process::exit(e.class.exit_code());
    }
}
