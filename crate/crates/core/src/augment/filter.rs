//! Separable Gaussian smoothing on f64 planes.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Border {
    /// Repeat the edge sample.
    Replicate,
    /// Mirror about the edge, repeating the edge sample (`c b a | a b c`).
    Reflect,
}

/// Normalised taps `exp(-k^2 / 2 sigma^2)` for `k` in `-radius..=radius`.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let taps: Vec<f64> = (-r..=r)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

fn border_index(i: isize, len: usize, border: Border) -> usize {
    let n = len as isize;
    match border {
        Border::Replicate => i.clamp(0, n - 1) as usize,
        Border::Reflect => {
            if n == 1 {
                return 0;
            }
            let period = 2 * n;
            let mut j = i.rem_euclid(period);
            if j >= n {
                j = period - 1 - j;
            }
            j as usize
        }
    }
}

/// Convolves a row-major plane with `kernel` along x then y.
pub(crate) fn convolve_separable(
    plane: &[f64],
    width: usize,
    height: usize,
    kernel: &[f64],
    border: Border,
) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; plane.len()];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for (k, &w) in kernel.iter().enumerate() {
                let sx = border_index(x as isize + k as isize - r, width, border);
                acc += w * row[sx];
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        for (k, &w) in kernel.iter().enumerate() {
            let sy = border_index(y as isize + k as isize - r, height, border);
            let src = &tmp[sy * width..(sy + 1) * width];
            let dst = &mut out[y * width..(y + 1) * width];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    out
}
