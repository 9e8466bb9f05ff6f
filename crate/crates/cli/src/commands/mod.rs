//! One module per subcommand.

mod fit;
mod gen;
mod plotdata;
mod run;
mod verify;

pub use fit::{cmd_fit, compute_fit, FitRow, FIT_FILE};
pub use gen::cmd_gen;
pub use plotdata::{cmd_plotdata, Figure, PLOT_DIR};
pub use run::{cmd_run, RunOptions, RunReport};
pub use verify::{cmd_verify, Check, VerifyTarget};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(
    path: &std::path::Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), crate::CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| crate::CliError::Runtime(e.to_string());
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(row).map_err(to_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| crate::CliError::Runtime(e.to_string()))?;
    crate::store::write_atomic(path, &bytes)
}
