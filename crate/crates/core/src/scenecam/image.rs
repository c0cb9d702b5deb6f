use std::collections::BTreeSet;

/// 8-bit RGB raster, row-major from the top-left pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

/// Segmentation images use the RGB layout with one flat colour per object.
pub type SegImage = RgbImage;

impl RgbImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; width as usize * height as usize * 3],
        }
    }

    /// Builds from a function of the linear pixel index.
    pub fn from_fn(width: u32, height: u32, f: impl Fn(usize) -> [u8; 3]) -> Self {
        let n = width as usize * height as usize;
        let data = (0..n).flat_map(f).collect();
        Self { width, height, data }
    }

    pub fn get(&self, u: u32, v: u32) -> [u8; 3] {
        let i = (v as usize * self.width as usize + u as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    pub fn distinct_colors(&self) -> BTreeSet<[u8; 3]> {
        self.pixels().collect()
    }
}

/// 32-bit float depth raster in metres, row-major from the top-left pixel.
/// Pixels that see nothing hold `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl DepthImage {
    pub fn from_vec(width: u32, height: u32, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width as usize * height as usize, "depth buffer size");
        Self { width, height, data }
    }

    pub fn get(&self, u: u32, v: u32) -> f32 {
        self.data[v as usize * self.width as usize + u as usize]
    }

    /// Bitwise equality, so NaN payloads and infinities compare exactly.
    pub fn bits_eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}
