//! Labeled image datasets and a deterministic synthetic digit renderer.
//!
//! The renderer draws the ten digits as jittered pen strokes under a random
//! affine transform, anti-aliased onto a 28x28 canvas with the glyph inside the
//! central 20x20 box (the usual MNIST framing). It stands in for MNIST when the
//! real IDX files are not available.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor;

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const NUM_CLASSES: usize = 10;

#[derive(Clone, Debug)]
pub struct Dataset {
    /// `[n, pixels]`, values in `[0, 1]`.
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let (n, _) = images.as_matrix_dims();
        if images.rank() != 2 || n != labels.len() {
            return Err(Error::CountMismatch { images: n, labels: labels.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidArgument(format!("label {bad} out of range for {num_classes} classes")));
        }
        Ok(Dataset { images, labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.images.as_matrix_dims().1
    }

    pub fn image(&self, i: usize) -> Tensor {
        self.images.row(i)
    }

    /// Gathers rows into a `[k, dim]` batch.
    pub fn gather(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let d = self.dim();
        let src = self.images.data();
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            data.extend_from_slice(&src[i * d..(i + 1) * d]);
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        (Tensor::from_parts(vec![indices.len(), d], data), labels)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let (images, labels) = self.gather(indices);
        Dataset { images, labels, num_classes: self.num_classes }
    }

    /// First `n` items and the remainder.
    pub fn split_at(&self, n: usize) -> (Dataset, Dataset) {
        let n = n.min(self.len());
        let head: Vec<usize> = (0..n).collect();
        let tail: Vec<usize> = (n..self.len()).collect();
        (self.subset(&head), self.subset(&tail))
    }

    pub fn indices_of_class(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    /// Per-row one-hot targets for a label batch.
    pub fn one_hot(labels: &[usize], num_classes: usize) -> Tensor {
        let mut data = vec![0.0; labels.len() * num_classes];
        for (r, &l) in labels.iter().enumerate() {
            data[r * num_classes + l] = 1.0;
        }
        Tensor::from_parts(vec![labels.len(), num_classes], data)
    }
}

type Stroke = Vec<(f64, f64)>;

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from_deg: f64, to_deg: f64, n: usize) -> Stroke {
    (0..=n)
        .map(|i| {
            let a = (from_deg + (to_deg - from_deg) * i as f64 / n as f64).to_radians();
            (cx + rx * a.cos(), cy + ry * a.sin())
        })
        .collect()
}

/// Stroke templates in a unit box, y pointing down.
fn glyph(digit: usize) -> Vec<Stroke> {
    match digit {
        0 => vec![arc(0.5, 0.5, 0.3, 0.44, 0.0, 360.0, 20)],
        1 => vec![vec![(0.32, 0.22), (0.52, 0.05), (0.52, 0.95)]],
        2 => {
            let mut s = arc(0.5, 0.3, 0.28, 0.24, 190.0, 360.0 + 30.0, 10);
            s.extend([(0.2, 0.95), (0.84, 0.95)]);
            vec![s]
        }
        3 => {
            let mut s = arc(0.5, 0.27, 0.26, 0.22, 200.0, 360.0 + 90.0, 10);
            s.extend(arc(0.5, 0.72, 0.3, 0.24, -90.0, 160.0, 10));
            vec![s]
        }
        4 => vec![vec![(0.68, 0.95), (0.68, 0.05), (0.14, 0.66), (0.88, 0.66)]],
        5 => {
            let mut s = vec![(0.8, 0.05), (0.28, 0.05), (0.24, 0.45)];
            s.extend(arc(0.48, 0.67, 0.32, 0.28, 220.0, 360.0 + 150.0, 12));
            vec![s]
        }
        6 => {
            let mut s = vec![(0.72, 0.05), (0.42, 0.3)];
            s.extend(arc(0.5, 0.7, 0.28, 0.25, 200.0, 200.0 + 360.0, 16));
            vec![s]
        }
        7 => vec![vec![(0.14, 0.05), (0.86, 0.05), (0.42, 0.95)]],
        8 => vec![arc(0.5, 0.27, 0.22, 0.22, 90.0, 450.0, 14), arc(0.5, 0.72, 0.28, 0.23, -90.0, 270.0, 14)],
        9 => {
            let mut s = arc(0.5, 0.3, 0.26, 0.25, 0.0, 360.0, 16);
            s.push((0.7, 0.95));
            vec![s]
        }
        _ => unreachable!("digit {digit}"),
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// Renders one digit with random shape jitter, affine transform and pen width.
pub fn render_digit(digit: usize, rng: &mut RngStream) -> Vec<f64> {
    let jitter = 0.035;
    let strokes: Vec<Stroke> = glyph(digit)
        .into_iter()
        .map(|s| s.into_iter().map(|(x, y)| (x + jitter * rng.normal(), y + jitter * rng.normal())).collect())
        .collect();

    let angle = rng.uniform_range(-0.22, 0.22);
    let shear = rng.uniform_range(-0.25, 0.25);
    let sx = rng.uniform_range(0.75, 1.05) * 20.0;
    let sy = rng.uniform_range(0.85, 1.05) * 20.0;
    let tx = rng.uniform_range(-1.5, 1.5);
    let ty = rng.uniform_range(-1.5, 1.5);
    let pen = rng.uniform_range(0.9, 1.9);
    let (c, s) = (angle.cos(), angle.sin());
    let centre = IMAGE_SIDE as f64 / 2.0;
    let to_canvas = |(x, y): (f64, f64)| {
        let (u, v) = ((x - 0.5) + shear * (y - 0.5), y - 0.5);
        let (u, v) = (u * sx, v * sy);
        (centre + tx + c * u - s * v, centre + ty + s * u + c * v)
    };
    let segments: Vec<((f64, f64), (f64, f64))> = strokes
        .iter()
        .flat_map(|s| s.windows(2).map(|w| (to_canvas(w[0]), to_canvas(w[1]))).collect::<Vec<_>>())
        .collect();

    let mut pixels = vec![0.0; IMAGE_PIXELS];
    for py in 0..IMAGE_SIDE {
        for px in 0..IMAGE_SIDE {
            let p = (px as f64 + 0.5, py as f64 + 0.5);
            let d = segments.iter().map(|&(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min);
            pixels[py * IMAGE_SIDE + px] = (pen + 0.5 - d).clamp(0.0, 1.0);
        }
    }
    pixels
}

/// `n` synthetic digits with labels cycling through the classes in shuffled order.
pub fn synthetic_digits(n: usize, seed: u64) -> Dataset {
    let mut rng = RngStream::new(seed, crate::rng::streams::DATA);
    let mut labels: Vec<usize> = (0..n).map(|i| i % NUM_CLASSES).collect();
    rng.shuffle(&mut labels);
    let mut data = Vec::with_capacity(n * IMAGE_PIXELS);
    for &l in &labels {
        data.extend(render_digit(l, &mut rng));
    }
    Dataset { images: Tensor::from_parts(vec![n, IMAGE_PIXELS], data), labels, num_classes: NUM_CLASSES }
}
