//! File formats: Touchstone v1.1, CSV traces, JSON reports and SVG figures.

mod plot;
mod report;
mod touchstone;

pub use plot::{smith_chart_svg, sweep_figure_svg, Trace};
pub use report::{
    parse_csv, read_csv, sha256_hex, write_csv, write_fit_report, InputDigest, LabeledFit, Report, CSV_HEADER,
};
pub use touchstone::{
    parse_touchstone, ports_from_extension, read_touchstone, write_touchstone, write_touchstone_file, DataFormat,
    FrequencyUnit, TouchstoneOptions,
};
