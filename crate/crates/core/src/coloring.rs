use serde::{Deserialize, Serialize};

use crate::bitset::BitSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Color {
    Red,
    Blue,
}

impl Color {
    pub fn flip(self) -> Self {
        match self {
            Color::Red => Color::Blue,
            Color::Blue => Color::Red,
        }
    }
}

/// Two-coloring of `0..n`, stored as the set of Red vertices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Coloring {
    red: BitSet,
    red_count: usize,
}

impl Coloring {
    pub fn from_red_set(red: BitSet) -> Self {
        let red_count = red.count();
        Self { red, red_count }
    }

    pub fn all_red(n: usize) -> Self {
        Self::from_red_set(BitSet::full(n))
    }

    pub fn all_blue(n: usize) -> Self {
        Self::from_red_set(BitSet::new(n))
    }

    /// Vertices `0..red_count` Red, the rest Blue.
    pub fn red_prefix(n: usize, red_count: usize) -> Self {
        assert!(red_count <= n, "red_count {red_count} exceeds n {n}");
        let mut red = BitSet::new(n);
        for v in 0..red_count {
            red.insert(v);
        }
        Self { red, red_count }
    }

    pub fn from_colors(colors: &[Color]) -> Self {
        let mut red = BitSet::new(colors.len());
        for (v, &c) in colors.iter().enumerate() {
            red.set(v, c == Color::Red);
        }
        Self::from_red_set(red)
    }

    /// Bit `v` of `mask` set means `v` is Red.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        let mut red = BitSet::new(n);
        for v in 0..n {
            red.set(v, (mask >> v) & 1 == 1);
        }
        Self::from_red_set(red)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.red.len()
    }

    #[inline]
    pub fn color(&self, v: usize) -> Color {
        if self.red.contains(v) {
            Color::Red
        } else {
            Color::Blue
        }
    }

    #[inline]
    pub fn is_red(&self, v: usize) -> bool {
        self.red.contains(v)
    }

    pub fn set(&mut self, v: usize, c: Color) {
        let was = self.red.contains(v);
        let now = c == Color::Red;
        if was != now {
            self.red.set(v, now);
            if now {
                self.red_count += 1;
            } else {
                self.red_count -= 1;
            }
        }
    }

    #[inline]
    pub fn red_count(&self) -> usize {
        self.red_count
    }

    #[inline]
    pub fn blue_count(&self) -> usize {
        self.n() - self.red_count
    }

    /// `red_count - n/2`; half-integer for odd `n`.
    pub fn gap(&self) -> f64 {
        self.red_count as f64 - self.n() as f64 / 2.0
    }

    pub fn red_set(&self) -> &BitSet {
        &self.red
    }

    pub fn blue_set(&self) -> BitSet {
        self.red.complement()
    }

    pub fn blue_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&v| !self.red.contains(v))
    }

    /// The unanimous color, if any. An empty coloring counts as neither.
    pub fn unanimous(&self) -> Option<Color> {
        if self.n() == 0 {
            None
        } else if self.red_count == self.n() {
            Some(Color::Red)
        } else if self.red_count == 0 {
            Some(Color::Blue)
        } else {
            None
        }
    }

    /// Red and Blue exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            red: self.red.complement(),
            red_count: self.blue_count(),
        }
    }

    pub fn colors(&self) -> Vec<Color> {
        (0..self.n()).map(|v| self.color(v)).collect()
    }
}
