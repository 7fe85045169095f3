//! Persistence: frame stacks, graymaps, image ingestion and CSV.

pub mod csv;
pub mod export;
pub mod ingest;
pub mod pgm;
pub mod spks;

pub use self::csv::{to_csv_string, write_csv};
pub use export::{export_image, read_exported, sidecar_path, ExportImage, Scaling};
pub use ingest::{ingest_images, ingest_to_file, list_images};
pub use pgm::{read_mask, read_pgm, write_mask, write_pgm, Graymap};
pub use spks::{read_stack, write_source, write_stack, StackHeader, StackReader, StackWriter};
