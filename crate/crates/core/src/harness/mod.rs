//! Convergence, self-convergence and stability studies, their tables and
//! field snapshots.

pub mod config;
pub mod output;
pub mod study;
pub mod table;

pub use config::{ConfigMap, LadderEntry, Mode, Problem, ReferenceKind, StudyConfig};
pub use output::{export_field, write_field_csv, write_vtk};
pub use study::{
    converge_mms, converge_reference, mms_errors, relax_profile, restrict_to, single_run,
    stability_table, thread_count, RunReport, THREADS_ENV,
};
pub use table::{fit_order, read_pairs, ConvergenceTable, ErrorRow, StabilityTable};
