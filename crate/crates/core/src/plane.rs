//! Single-channel and RGB 8-bit image buffers.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlaneError {
    #[error("plane dimensions must be positive, got {height}x{width}")]
    EmptyDims { height: usize, width: usize },
    #[error("buffer holds {actual} values, expected {expected}")]
    Length { expected: usize, actual: usize },
}

/// Row-major single-channel 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ImagePlane {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl ImagePlane {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self, PlaneError> {
        if height == 0 || width == 0 {
            return Err(PlaneError::EmptyDims { height, width });
        }
        if pixels.len() != height * width {
            return Err(PlaneError::Length { expected: height * width, actual: pixels.len() });
        }
        Ok(ImagePlane { height, width, pixels })
    }

    /// Plane filled with `value`.
    ///
    /// # Panics
    ///
    /// If either dimension is zero.
    pub fn filled(height: usize, width: usize, value: u8) -> Self {
        Self::new(height, width, vec![value; height * width]).expect("positive dimensions")
    }

    /// Plane whose pixel `(y, x)` is `f(y, x)`.
    ///
    /// # Panics
    ///
    /// If either dimension is zero.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(y, x));
            }
        }
        Self::new(height, width, pixels).expect("positive dimensions")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Pixel at a possibly out-of-bounds coordinate, clamped to the nearest edge.
    #[inline]
    pub fn get_clamped(&self, y: isize, x: isize) -> u8 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Quarter turn clockwise: output is `width × height`.
    pub fn rotate90(&self) -> ImagePlane {
        let (h, w) = self.dims();
        ImagePlane::from_fn(w, h, |y, x| self.get(h - 1 - x, y))
    }

    /// `j` clockwise quarter turns.
    pub fn rotate(&self, j: usize) -> ImagePlane {
        (0..j % 4).fold(self.clone(), |p, _| p.rotate90())
    }

    /// Sub-rectangle starting at `(top, left)`.
    ///
    /// # Panics
    ///
    /// If the rectangle is empty or leaves the plane.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> ImagePlane {
        assert!(top + height <= self.height && left + width <= self.width, "crop out of bounds");
        ImagePlane::from_fn(height, width, |y, x| self.get(top + y, left + x))
    }
}

/// Interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self, PlaneError> {
        if height == 0 || width == 0 {
            return Err(PlaneError::EmptyDims { height, width });
        }
        if data.len() != height * width * 3 {
            return Err(PlaneError::Length { expected: height * width * 3, actual: data.len() });
        }
        Ok(RgbImage { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Splits into R, G and B planes.
    pub fn planes(&self) -> [ImagePlane; 3] {
        let plane = |c: usize| {
            let pixels = self.data.iter().skip(c).step_by(3).copied().collect();
            ImagePlane::new(self.height, self.width, pixels).expect("same dims")
        };
        [plane(0), plane(1), plane(2)]
    }

    /// Interleaves three equally sized planes.
    ///
    /// # Panics
    ///
    /// If the planes differ in size.
    pub fn from_planes(planes: &[ImagePlane; 3]) -> RgbImage {
        let (h, w) = planes[0].dims();
        assert!(planes.iter().all(|p| p.dims() == (h, w)), "planes differ in size");
        let mut data = Vec::with_capacity(h * w * 3);
        for i in 0..h * w {
            data.extend(planes.iter().map(|p| p.pixels()[i]));
        }
        RgbImage { height: h, width: w, data }
    }
}

/// A decoded image: grayscale or RGB.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Image {
    Gray(ImagePlane),
    Rgb(RgbImage),
}

impl Image {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Image::Gray(p) => p.dims(),
            Image::Rgb(c) => c.dims(),
        }
    }

    /// Applies `f` to every channel independently.
    pub fn map_planes<E>(&self, mut f: impl FnMut(&ImagePlane) -> Result<ImagePlane, E>) -> Result<Image, E> {
        Ok(match self {
            Image::Gray(p) => Image::Gray(f(p)?),
            Image::Rgb(c) => {
                let [r, g, b] = c.planes();
                Image::Rgb(RgbImage::from_planes(&[f(&r)?, f(&g)?, f(&b)?]))
            }
        })
    }
}
