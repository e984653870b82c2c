//! Image and table files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{ImageBuffer, Luma, Rgb, RgbImage};
use stereolane_core::lanes::LaneSet;
use stereolane_core::{DisparityMap, GrayImage, Grid};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Image { path: String, source: image::ImageError },
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{0}")]
    Core(#[from] stereolane_core::Error),
}

fn shown(path: &Path) -> String {
    path.display().to_string()
}

/// Reads a PNG or PGM file as a grey image with intensities in [0, 1].
/// Colour inputs are converted to luma.
pub fn read_gray(path: &Path) -> Result<GrayImage, IoError> {
    let img = image::open(path).map_err(|source| IoError::Image {
        path: shown(path),
        source,
    })?;
    let luma = img.to_luma8();
    let (w, h) = luma.dimensions();
    Ok(GrayImage::from_u8(w as usize, h as usize, luma.as_raw())?)
}

pub fn write_gray_png(path: &Path, img: &GrayImage) -> Result<(), IoError> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, img.to_u8()).expect("buffer has image size");
    buf.save(path).map_err(|source| IoError::Image {
        path: shown(path),
        source,
    })
}

pub fn write_mask_png(path: &Path, mask: &Grid<bool>) -> Result<(), IoError> {
    let data = mask.data().iter().map(|&m| if m { 255 } else { 0 }).collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, data).expect("buffer has mask size");
    buf.save(path).map_err(|source| IoError::Image {
        path: shown(path),
        source,
    })
}

/// Binary 16-bit PGM (maxval 65535, big-endian samples). The image codec
/// only encodes 8-bit graymaps, so the header is written here.
pub fn write_pgm16(path: &Path, width: usize, height: usize, samples: &[u16]) -> Result<(), IoError> {
    let err = |source| IoError::File {
        path: shown(path),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(err)?);
    write!(w, "P5\n{width} {height}\n65535\n").map_err(err)?;
    let bytes: Vec<u8> = samples.iter().flat_map(|s| s.to_be_bytes()).collect();
    w.write_all(&bytes).and_then(|_| w.flush()).map_err(err)
}

/// Reads a 16-bit (or 8-bit) PGM back as raw samples.
pub fn read_pgm16(path: &Path) -> Result<Grid<u16>, IoError> {
    let img = image::open(path).map_err(|source| IoError::Image {
        path: shown(path),
        source,
    })?;
    let l16 = img.to_luma16();
    let (w, h) = l16.dimensions();
    Ok(Grid::from_vec(w as usize, h as usize, l16.into_raw())?)
}

/// Disparities scaled by 256, 0 for invalid pixels.
pub fn write_disparity_pgm(path: &Path, disp: &DisparityMap) -> Result<(), IoError> {
    let samples: Vec<u16> = disp.data().iter().map(|&d| d.saturating_mul(256)).collect();
    write_pgm16(path, disp.width(), disp.height(), &samples)
}

/// Counts saturated to 16 bits.
pub fn write_counts_pgm(path: &Path, counts: &Grid<u32>) -> Result<(), IoError> {
    let samples: Vec<u16> = counts
        .data()
        .iter()
        .map(|&c| c.min(u32::from(u16::MAX)) as u16)
        .collect();
    write_pgm16(path, counts.width(), counts.height(), &samples)
}

/// Maps a real-valued raster linearly onto 16 bits, `lo` to 0 and `hi` to
/// 65535.
pub fn write_real_pgm(path: &Path, map: &Grid<f64>, lo: f64, hi: f64) -> Result<(), IoError> {
    let span = if hi > lo { hi - lo } else { 1.0 };
    let samples: Vec<u16> = map
        .data()
        .iter()
        .map(|&x| ((x - lo) / span * 65535.0).round().clamp(0.0, 65535.0) as u16)
        .collect();
    write_pgm16(path, map.width(), map.height(), &samples)
}

/// `lane_id,v,u`, one row per polyline point, lanes in energy order.
pub fn write_lanes_csv(path: &Path, lanes: &LaneSet) -> Result<(), IoError> {
    let err = |source| IoError::Csv {
        path: shown(path),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["lane_id", "v", "u"]).map_err(err)?;
    for (id, lane) in lanes.lanes.iter().enumerate() {
        for &(u, v) in &lane.polyline {
            w.serialize((id, v, u)).map_err(err)?;
        }
    }
    w.flush().map_err(|source| IoError::File {
        path: shown(path),
        source,
    })
}

/// Reads `lane_id,v,u` rows back.
pub fn read_lanes_csv(path: &Path) -> Result<Vec<(usize, usize, f64)>, IoError> {
    let err = |source| IoError::Csv {
        path: shown(path),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    r.deserialize().collect::<Result<_, _>>().map_err(err)
}

/// Generic `(a, b)` table with a header, for paths and histograms.
pub fn write_pairs_csv<A: serde::Serialize, B: serde::Serialize>(
    path: &Path,
    header: [&str; 2],
    rows: impl IntoIterator<Item = (A, B)>,
) -> Result<(), IoError> {
    let err = |source| IoError::Csv {
        path: shown(path),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.serialize(row).map_err(err)?;
    }
    w.flush().map_err(|source| IoError::File {
        path: shown(path),
        source,
    })
}

/// The left image in grey with every lane drawn as a red polyline.
pub fn render_overlay(img: &GrayImage, lanes: &LaneSet) -> RgbImage {
    let (w, h) = (img.width(), img.height());
    let grey = img.to_u8();
    let mut out = RgbImage::from_fn(w as u32, h as u32, |u, v| {
        let g = grey[v as usize * w + u as usize];
        Rgb([g, g, g])
    });
    let red = Rgb([255, 0, 0]);
    for lane in &lanes.lanes {
        for pair in lane.polyline.windows(2) {
            let ((u0, v0), (u1, _)) = (pair[0], pair[1]);
            // Consecutive points sit on adjacent rows; fill the horizontal
            // run between them on the lower row so the line stays connected.
            let (a, b) = (u0.round().min(u1.round()), u0.round().max(u1.round()));
            for u in a as i64..=b as i64 {
                if u >= 0 && (u as usize) < w && v0 < h {
                    out.put_pixel(u as u32, v0 as u32, red);
                }
            }
        }
        if let Some(&(u, v)) = lane.polyline.last() {
            let u = u.round();
            if u >= 0.0 && (u as usize) < w && v < h {
                out.put_pixel(u as u32, v as u32, red);
            }
        }
    }
    out
}

pub fn write_overlay_png(path: &Path, img: &GrayImage, lanes: &LaneSet) -> Result<(), IoError> {
    render_overlay(img, lanes).save(path).map_err(|source| IoError::Image {
        path: shown(path),
        source,
    })
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let file = File::create(path).map_err(|source| IoError::File {
        path: shown(path),
        source,
    })?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| IoError::Json {
        path: shown(path),
        source,
    })?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|source| IoError::File {
            path: shown(path),
            source,
        })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::File {
        path: shown(path),
        source,
    })
}
