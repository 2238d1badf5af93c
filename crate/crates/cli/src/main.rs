use std::io;

use clap::Parser;
use mmse_lab_cli::{main_with, Cli};

fn main() {
    let cli = Cli::parse();
    let code = main_with(cli, &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
