//! Random elastic deformations and break masks for 2D strokes.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::morph::blur::gaussian_blur_2d;
use crate::morph::rng::SimRng;
use crate::volume::{Binary2, Image2, Scalar2};

/// Per-pixel displacement in pixel units.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformationField2D {
    pub width: usize,
    pub height: usize,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl DeformationField2D {
    pub fn zero(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            dx: vec![0.0; width * height],
            dy: vec![0.0; width * height],
        }
    }

    pub fn max_magnitude(&self) -> f64 {
        self.dx
            .iter()
            .zip(&self.dy)
            .map(|(x, y)| x.hypot(*y))
            .fold(0.0, f64::max)
    }
}

fn normal_noise(width: usize, height: usize, rng: &mut SimRng) -> Scalar2 {
    Image2::from_fn(width, height, |_, _| StandardNormal.sample(rng))
}

/// Smooth random displacement field whose largest magnitude is exactly `amplitude_px`.
pub fn random_deformation_2d(
    (width, height): (usize, usize),
    rng: &mut SimRng,
    amplitude_px: f64,
    smooth_sigma_px: f64,
) -> Result<DeformationField2D> {
    if !(amplitude_px >= 0.0 && amplitude_px.is_finite()) {
        return Err(Error::InvalidArgument(format!("amplitude {amplitude_px} must be >= 0")));
    }
    if !(smooth_sigma_px > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma {smooth_sigma_px} must be > 0")));
    }
    // draw noise even for a zero amplitude so the stream position does not depend on it
    let nx = gaussian_blur_2d(&normal_noise(width, height, rng), [smooth_sigma_px; 2]);
    let ny = gaussian_blur_2d(&normal_noise(width, height, rng), [smooth_sigma_px; 2]);
    let mut field = DeformationField2D {
        width,
        height,
        dx: nx.data,
        dy: ny.data,
    };
    let peak = field.max_magnitude();
    let scale = if amplitude_px == 0.0 || peak == 0.0 { 0.0 } else { amplitude_px / peak };
    field.dx.iter_mut().for_each(|v| *v *= scale);
    field.dy.iter_mut().for_each(|v| *v *= scale);
    Ok(field)
}

/// Backward warp with nearest-neighbour sampling; samples outside the image read as 0.
pub fn warp_2d(img: &Binary2, field: &DeformationField2D) -> Result<Binary2> {
    if (img.width, img.height) != (field.width, field.height) {
        return Err(Error::InvalidArgument(format!(
            "image {}x{} and field {}x{} differ",
            img.width, img.height, field.width, field.height
        )));
    }
    Ok(Image2::from_fn(img.width, img.height, |u, v| {
        let i = u + img.width * v;
        let su = (u as f64 + field.dx[i]).round() as i64;
        let sv = (v as f64 + field.dy[i]).round() as i64;
        img.at(su, sv)
    }))
}

/// Random mask keeping `round(coverage * n)` pixels: those with the largest
/// values of white noise blurred at `scale_px`.
pub fn random_break_mask(
    (width, height): (usize, usize),
    rng: &mut SimRng,
    coverage: f64,
    scale_px: f64,
) -> Result<Binary2> {
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::InvalidArgument(format!("coverage {coverage} must lie in (0, 1)")));
    }
    if !(scale_px > 0.0) {
        return Err(Error::InvalidArgument(format!("scale {scale_px} must be > 0")));
    }
    let noise = gaussian_blur_2d(&normal_noise(width, height, rng), [scale_px; 2]);
    let n = width * height;
    let keep = ((coverage * n as f64).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| noise.data[b].total_cmp(&noise.data[a]).then(a.cmp(&b)));
    let mut out = Image2::filled(width, height, false);
    for &i in &order[..keep] {
        out.data[i] = true;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude_gives_zero_field() {
        let f = random_deformation_2d((9, 7), &mut SimRng::new(1), 0.0, 3.0).unwrap();
        assert_eq!(f, DeformationField2D::zero(9, 7));
    }

    #[test]
    fn amplitude_is_peak_magnitude() {
        let f = random_deformation_2d((32, 24), &mut SimRng::new(7), 3.0, 4.0).unwrap();
        assert!((f.max_magnitude() - 3.0).abs() < 1e-6);
        let g = random_deformation_2d((32, 24), &mut SimRng::new(7), 3.0, 4.0).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn zero_field_warp_is_identity() {
        let img = Image2::from_fn(6, 5, |u, v| (u * v) % 3 == 1);
        assert_eq!(warp_2d(&img, &DeformationField2D::zero(6, 5)).unwrap(), img);
    }

    #[test]
    fn unit_shift_translates() {
        let img = Image2::from_fn(6, 4, |u, v| u == 2 && v == 1);
        let mut f = DeformationField2D::zero(6, 4);
        f.dx.iter_mut().for_each(|d| *d = 1.0);
        let out = warp_2d(&img, &f).unwrap();
        // out(u) = in(u + 1): the pixel moves one step toward lower u
        assert_eq!(out.pixels().collect::<Vec<_>>(), vec![(1, 1)]);
        assert!(warp_2d(&img, &DeformationField2D::zero(5, 4)).is_err());
    }

    #[test]
    fn break_mask_coverage() {
        let m = random_break_mask((64, 64), &mut SimRng::new(2), 0.5, 8.0).unwrap();
        assert_eq!(m.count(), 2048);
        assert!(random_break_mask((4, 4), &mut SimRng::new(2), 1.0, 8.0).is_err());
    }
}
