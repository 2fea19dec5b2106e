//! Separable Gaussian filtering with half-sample symmetric ("reflect") borders.

use crate::volume::Scalar2;

/// Normalized sampled Gaussian, radius `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Maps any integer index into `0..n` by reflection `(d c b a | a b c d | d c b a)`.
#[inline]
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Convolves `data` (first axis fastest) along `axis` in place.
fn convolve_axis(data: &mut [f64], dims: &[usize], axis: usize, kernel: &[f64]) {
    let n = dims[axis];
    let stride: usize = dims[..axis].iter().product();
    let outer: usize = dims[axis + 1..].iter().product();
    let radius = (kernel.len() / 2) as i64;
    let mut line = vec![0.0; n];
    for o in 0..outer {
        for inner in 0..stride {
            let base = o * stride * n + inner;
            for (t, slot) in line.iter_mut().enumerate() {
                *slot = data[base + t * stride];
            }
            for t in 0..n {
                let mut acc = 0.0;
                for (ki, w) in kernel.iter().enumerate() {
                    let src = reflect(t as i64 + ki as i64 - radius, n);
                    acc += w * line[src];
                }
                data[base + t * stride] = acc;
            }
        }
    }
}

/// N-dimensional separable blur; `sigma[a]` applies along axis `a`.
pub fn gaussian_blur_nd(data: &[f64], dims: &[usize], sigma: &[f64]) -> Vec<f64> {
    assert_eq!(dims.len(), sigma.len());
    assert_eq!(data.len(), dims.iter().product::<usize>());
    let mut out = data.to_vec();
    for (axis, &s) in sigma.iter().enumerate() {
        convolve_axis(&mut out, dims, axis, &gaussian_kernel(s));
    }
    out
}

pub fn gaussian_blur_2d(img: &Scalar2, sigma: [f64; 2]) -> Scalar2 {
    Scalar2 {
        width: img.width,
        height: img.height,
        data: gaussian_blur_nd(&img.data, &[img.width, img.height], &sigma),
    }
}

pub fn gaussian_blur_3d(values: &[f64], dims: [usize; 3], sigma: [f64; 3]) -> Vec<f64> {
    gaussian_blur_nd(values, &dims, &sigma)
}
