//! Datasets, persistence and the end-to-end pipeline.

pub mod dataset;
pub mod io;
pub mod pipeline;

pub use dataset::{avg_log_kurtosis, generate_mixture, sinh_arcsinh_transform, DatasetKind, DatasetSpec, MIXTURE_COMPONENTS};
pub use io::{load_binary, load_csv, load_dataset, load_result, save_binary, save_csv, save_dataset, save_result, DataFormat};
pub use pipeline::{run_pipeline, LimitMethod, PipelineConfig, RunResult};
