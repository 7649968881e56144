//! Renders the ownership map of a distribution pattern.
//!
//!     pattern-viz --spec "16x10 TILE(4),TILE(2) team 2x2 col" --format svg -o tiles.svg

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use pgas::{viz, Error, PatternSpec};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Svg,
}

#[derive(Parser, Debug)]
#[command(about = "Visualize a data distribution pattern")]
struct Args {
    /// Pattern text, e.g. "20 BLOCKCYCLIC(3) team 4".
    #[arg(long)]
    spec: String,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Unit count when the spec has no team clause.
    #[arg(long)]
    units: Option<usize>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let pattern = match PatternSpec::parse(&args.spec).and_then(|s| s.build(args.units)) {
        Ok(p) => p,
        Err(e) => {
            if let Error::Parse { position, .. } = e {
                eprintln!("{}", args.spec);
                eprintln!("{:>width$}", "^", width = position + 1);
            }
            eprintln!("pattern-viz: {e}");
            return ExitCode::from(2);
        }
    };
    let rendered = match args.format {
        Format::Text => viz::render_text(&pattern),
        Format::Svg => viz::render_svg(&pattern),
    };
    match args.output {
        Some(path) => {
            if let Err(e) = fs::write(&path, rendered) {
                eprintln!("pattern-viz: cannot write {}: {e}", path.display());
                return ExitCode::FAILURE;
            }
        }
        None => print!("{rendered}"),
    }
    ExitCode::SUCCESS
}
