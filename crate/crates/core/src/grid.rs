use serde::{Deserialize, Serialize};

/// Row-major 2D raster. Row 0 is the top image row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<V> {
    width: usize,
    height: usize,
    data: Vec<V>,
}

/// Binary map, `true` = set.
pub type BinaryMap = Grid<bool>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("grid size mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
pub struct SizeMismatch {
    pub left_width: usize,
    pub left_height: usize,
    pub right_width: usize,
    pub right_height: usize,
}

impl<V: Clone> Grid<V> {
    pub fn filled(width: usize, height: usize, value: V) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }
}

impl<V> Grid<V> {
    /// Panics if `data.len() != width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<V>) -> Self {
        assert_eq!(data.len(), width * height, "grid data length does not match {width}x{height}");
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> V) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[V] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [V] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<V> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &V {
        &self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: V) {
        self.data[row * self.width + col] = value;
    }

    pub fn same_size<W>(&self, other: &Grid<W>) -> Result<(), SizeMismatch> {
        if self.width == other.width && self.height == other.height {
            Ok(())
        } else {
            Err(SizeMismatch {
                left_width: self.width,
                left_height: self.height,
                right_width: other.width,
                right_height: other.height,
            })
        }
    }

    pub fn map<W>(&self, f: impl FnMut(&V) -> W) -> Grid<W> {
        Grid { width: self.width, height: self.height, data: self.data.iter().map(f).collect() }
    }
}

impl BinaryMap {
    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// `true` if every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMap) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }
}
