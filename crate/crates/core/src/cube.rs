//! Raster data model: hyperspectral cubes, ground-truth label maps and
//! predicted class maps.

use crate::error::{invalid, shape, Error, Result};

/// Class id reserved for unlabeled ground-truth pixels.
pub const IGNORE: u16 = u16::MAX;

/// An `H × W × D` radiance cube stored band-sequential (BSQ): band `b`
/// occupies `data[b*H*W .. (b+1)*H*W]`, row-major within the band.
///
/// Values are held in double precision. The on-disk representation is
/// float32, so cubes that came from [`crate::io::read_cube`] or the synthetic
/// generator round-trip bitwise.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<f64>,
}

impl HsiCube {
    pub fn new(height: usize, width: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 {
            return Err(invalid!("height must be ≥ 1"));
        }
        if width == 0 {
            return Err(invalid!("width must be ≥ 1"));
        }
        if bands == 0 {
            return Err(invalid!("bands must be ≥ 1"));
        }
        let expected = height * width * bands;
        if data.len() != expected {
            return Err(shape!("cube {height}x{width}x{bands} needs {expected} values, got {}", data.len()));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { height, width, bands, data })
    }

    pub fn zeros(height: usize, width: usize, bands: usize) -> Result<Self> {
        Self::new(height, width, bands, vec![0.0; height * width * bands])
    }

    /// Builds a cube from per-pixel spectra (`pixels[i]` has `bands` entries).
    pub fn from_pixel_spectra(height: usize, width: usize, pixels: &[Vec<f64>]) -> Result<Self> {
        let bands = pixels.first().map_or(0, Vec::len);
        if pixels.len() != height * width {
            return Err(shape!("{} spectra for {height}x{width} pixels", pixels.len()));
        }
        let n = height * width;
        let mut data = vec![0.0; n * bands];
        for (i, spectrum) in pixels.iter().enumerate() {
            if spectrum.len() != bands {
                return Err(shape!("pixel {i} has {} bands, expected {bands}", spectrum.len()));
            }
            for (b, v) in spectrum.iter().enumerate() {
                data[b * n + i] = *v;
            }
        }
        Self::new(height, width, bands, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn band(&self, b: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn get(&self, y: usize, x: usize, b: usize) -> f64 {
        self.data[b * self.pixels() + y * self.width + x]
    }

    /// Spectrum of pixel `i` (row-major pixel index).
    pub fn spectrum(&self, i: usize) -> Vec<f64> {
        let n = self.pixels();
        (0..self.bands).map(|b| self.data[b * n + i]).collect()
    }

    /// Sub-cube `[y0, y0+h) × [x0, x0+w)` over all bands.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Self> {
        if y0 + h > self.height || x0 + w > self.width {
            return Err(shape!("crop {h}x{w} at ({y0},{x0}) exceeds {}x{}", self.height, self.width));
        }
        let mut data = Vec::with_capacity(h * w * self.bands);
        for b in 0..self.bands {
            let band = self.band(b);
            for y in y0..y0 + h {
                data.extend_from_slice(&band[y * self.width + x0..y * self.width + x0 + w]);
            }
        }
        Self::new(h, w, self.bands, data)
    }
}

/// Ground-truth class id per pixel; [`IGNORE`] marks unlabeled pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    ids: Vec<u16>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, ids: Vec<u16>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid!("label map dimensions must be ≥ 1"));
        }
        if ids.len() != height * width {
            return Err(shape!("label map {height}x{width} needs {} ids, got {}", height * width, ids.len()));
        }
        Ok(Self { height, width, ids })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn ids(&self) -> &[u16] {
        &self.ids
    }

    /// Largest non-ignore class id, if any pixel is labeled.
    pub fn max_class(&self) -> Option<u16> {
        self.ids.iter().copied().filter(|&c| c != IGNORE).max()
    }

    /// Fails when a labeled pixel has an id outside `0..num_classes`.
    pub fn check_classes(&self, num_classes: usize) -> Result<()> {
        match self.max_class() {
            Some(c) if c as usize >= num_classes => {
                Err(invalid!("label map contains class {c} but only {num_classes} classes are configured"))
            }
            _ => Ok(()),
        }
    }

    pub fn check_dims(&self, height: usize, width: usize) -> Result<()> {
        if self.height != height || self.width != width {
            return Err(shape!("label map is {}x{}, expected {height}x{width}", self.height, self.width));
        }
        Ok(())
    }

    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Self> {
        if y0 + h > self.height || x0 + w > self.width {
            return Err(shape!("crop exceeds label map"));
        }
        let ids =
            (y0..y0 + h).flat_map(|y| self.ids[y * self.width + x0..y * self.width + x0 + w].iter().copied()).collect();
        Self::new(h, w, ids)
    }
}

/// Predicted class id per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    height: usize,
    width: usize,
    ids: Vec<u16>,
}

impl ClassMap {
    pub fn new(height: usize, width: usize, ids: Vec<u16>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid!("class map dimensions must be ≥ 1"));
        }
        if ids.len() != height * width {
            return Err(shape!("class map {height}x{width} needs {} ids, got {}", height * width, ids.len()));
        }
        Ok(Self { height, width, ids })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn ids(&self) -> &[u16] {
        &self.ids
    }

    pub fn get(&self, y: usize, x: usize) -> u16 {
        self.ids[y * self.width + x]
    }

    pub fn check_classes(&self, num_classes: usize) -> Result<()> {
        if let Some(&c) = self.ids.iter().find(|&&c| c as usize >= num_classes) {
            return Err(invalid!("class map contains class {c} ≥ {num_classes}"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_bands() {
        let err = HsiCube::new(2, 2, 0, vec![]).unwrap_err();
        assert!(err.to_string().contains("bands must be ≥ 1"));
    }

    #[test]
    fn rejects_non_finite_with_index() {
        let mut data = vec![0.0; 8];
        data[5] = f64::NAN;
        match HsiCube::new(2, 2, 2, data) {
            Err(Error::NonFinite { index }) => assert_eq!(index, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bsq_indexing() {
        let pixels = vec![vec![1.0, 10.0], vec![2.0, 20.0], vec![3.0, 30.0], vec![4.0, 40.0]];
        let c = HsiCube::from_pixel_spectra(2, 2, &pixels).unwrap();
        assert_eq!(c.data(), &[1.0, 2.0, 3.0, 4.0, 10.0, 20.0, 30.0, 40.0]);
        assert_eq!(c.get(1, 0, 1), 30.0);
        assert_eq!(c.spectrum(3), vec![4.0, 40.0]);
    }

    #[test]
    fn crop_cube() {
        let data: Vec<f64> = (0..18).map(f64::from).collect();
        let c = HsiCube::new(3, 3, 2, data).unwrap();
        let s = c.crop(1, 1, 2, 2).unwrap();
        assert_eq!(s.data(), &[4.0, 5.0, 7.0, 8.0, 13.0, 14.0, 16.0, 17.0]);
    }

    #[test]
    fn label_class_check() {
        let l = LabelMap::new(1, 3, vec![0, 2, IGNORE]).unwrap();
        assert_eq!(l.max_class(), Some(2));
        assert!(l.check_classes(3).is_ok());
        assert!(l.check_classes(2).is_err());
    }
}
