use std::path::PathBuf;

use clap::Args;
use latent_adjust::eval::resemblance_until;

use crate::error::{CliError, CliResult};
use crate::io::{fmt_f64, read_rows, write_csv};

#[derive(Debug, Args)]
pub struct ResemblanceArgs {
    /// P-values, one row per gene and one column per list.
    #[arg(long)]
    pub pvals: PathBuf,
    /// Stop once more than this many genes are called in some list.
    #[arg(long, default_value_t = 700)]
    pub u_max: u64,
    /// CSV with columns `alpha,intersections,union`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &ResemblanceArgs) -> CliResult<()> {
    let rows = read_rows(&args.pvals)?;
    let m = rows[0].len();
    if m < 2 {
        return Err(CliError::Invalid(format!(
            "{}: need at least two columns, found {m}",
            args.pvals.display()
        )));
    }
    let lists: Vec<Vec<f64>> = (0..m).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let points = resemblance_until(&lists, args.u_max)?;
    let lines = points
        .iter()
        .map(|p| format!("{},{},{}", fmt_f64(p.alpha), p.intersections, p.union));
    write_csv(&args.out, "alpha,intersections,union", lines)
}
