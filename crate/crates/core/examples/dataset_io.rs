//! Generates Gaussian blobs, writes them in both file formats and reads
//! them back.
//!
//! ```text
//! cargo run --example dataset_io
//! ```

use hsgd::data::{load_binary, load_csv, make_synthetic, save_binary, save_csv, SyntheticSpec};
use hsgd::math::{Purpose, RngStream};

fn main() -> hsgd::Result<()> {
    let spec = SyntheticSpec { n: 300, input_dim: 4, num_classes: 3, separation: 4.0, label_noise: 0.05, ..Default::default() };
    let data = make_synthetic(&spec, &mut RngStream::for_purpose(3, Purpose::Data, 0, 0))?;
    let dir = std::env::temp_dir().join("hsgd-dataset-io");
    std::fs::create_dir_all(&dir)?;

    let csv_path = dir.join("blobs.csv");
    save_csv(&data, &csv_path)?;
    let from_csv = load_csv(&csv_path, None)?;
    println!("{} -> {} rows, {} classes, identical: {}", csv_path.display(), from_csv.len(), from_csv.num_classes(), from_csv == data);

    // the binary format stores f32 features
    let bin_path = dir.join("blobs.bin");
    save_binary(&data, &bin_path)?;
    let from_bin = load_binary(&bin_path)?;
    let worst = data.features().iter().zip(from_bin.features()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("{} -> {} rows, labels identical: {}, max feature error {worst:.1e}", bin_path.display(), from_bin.len(), from_bin.labels() == data.labels());

    let counts = (0..spec.num_classes).map(|c| data.labels().iter().filter(|&&l| l == c).count()).collect::<Vec<_>>();
    println!("class counts {counts:?}");
    Ok(())
}
