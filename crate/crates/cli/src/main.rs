//! `backscatter` — batch pipeline driver.
//!
//! Subcommands chain into the full workflow: `simulate` writes contaminated
//! photodetector series, `spectrum` estimates ASDs, `fit-shelf` recovers the
//! backscatter-to-carrier ratio, `scale-background` converts driven
//! measurements to background levels, `budget` evaluates the OPO
//! reflectivity and crystal BSDF, `project` builds requirement-margin
//! reports and `plot-data` emits normalized plot traces.
//!
//! Every command writes a manifest next to its primary output; sidecars
//! reference it. Outputs carry SI units only and 17-significant-digit
//! decimals, so reruns with the same manifest are byte-identical.

// `!(x > 0.0)` guards reject NaN along with the out-of-range value.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod manifest;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "backscatter", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a photodetector power series under a backscatter drive.
    Simulate(commands::SimulateArgs),
    /// Estimate a one-sided ASD from a time-series CSV.
    Spectrum(commands::SpectrumArgs),
    /// Fit the shelf model to a RIN spectrum for P_s / P_c.
    FitShelf(commands::FitShelfArgs),
    /// Scale a driven backscatter RIN to background motion levels.
    ScaleBackground(commands::ScaleBackgroundArgs),
    /// OPO backscatter reflectivity and crystal BSDF budget.
    Budget(commands::BudgetArgs),
    /// Advanced-detector requirement curve and isolation-deficit report.
    Project(commands::ProjectArgs),
    /// Emit plot-ready traces, optionally normalized to quantum noise.
    PlotData(commands::PlotDataArgs),
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Spectrum(args) => commands::spectrum(args),
        Command::FitShelf(args) => commands::fit_shelf(args),
        Command::ScaleBackground(args) => commands::scale_background(args),
        Command::Budget(args) => commands::budget(args),
        Command::Project(args) => commands::project(args),
        Command::PlotData(args) => commands::plot_data(args),
    }
}
