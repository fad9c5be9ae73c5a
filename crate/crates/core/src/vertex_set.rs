use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Bitset over the points of a grid.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct VertexSet {
    len: usize,
    words: Vec<u64>,
}

impl VertexSet {
    pub fn empty(len: usize) -> Self {
        VertexSet { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::empty(len);
        for w in s.words.iter_mut() {
            *w = !0;
        }
        s.trim();
        s
    }

    pub fn from_indices(len: usize, it: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(len);
        for i in it {
            s.insert(i);
        }
        s
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut s = Self::empty(len);
        for i in 0..len {
            if f(i) {
                s.insert(i);
            }
        }
        s
    }

    fn trim(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }

    /// Number of grid points the set ranges over.
    pub fn universe(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, i: usize) -> bool {
        let (w, b) = (i >> 6, 1u64 << (i & 63));
        let fresh = self.words[w] & b == 0;
        self.words[w] |= b;
        fresh
    }

    #[inline]
    pub fn remove(&mut self, i: usize) -> bool {
        let (w, b) = (i >> 6, 1u64 << (i & 63));
        let had = self.words[w] & b != 0;
        self.words[w] &= !b;
        had
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn first(&self) -> Option<usize> {
        self.iter().next()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + t)
            })
        })
    }

    fn zip_with(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Self {
        assert_eq!(self.len, other.len, "vertex sets over different grids");
        let mut out = self.clone();
        for (a, b) in out.words.iter_mut().zip(&other.words) {
            *a = f(*a, *b);
        }
        out
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        for w in out.words.iter_mut() {
            *w = !*w;
        }
        out.trim();
        out
    }

    pub fn union_with(&mut self, other: &Self) {
        assert_eq!(self.len, other.len, "vertex sets over different grids");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Runs of consecutive members as (start, length).
    pub fn runs(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for i in self.iter() {
            match out.last_mut() {
                Some((s, l)) if *s + *l == i => *l += 1,
                _ => out.push((i, 1)),
            }
        }
        out
    }

    pub fn from_runs(len: usize, runs: &[(usize, usize)]) -> Result<Self, String> {
        let mut s = Self::empty(len);
        for &(start, l) in runs {
            if start + l > len {
                return Err(format!("run {start}+{l} exceeds universe {len}"));
            }
            for i in start..start + l {
                s.insert(i);
            }
        }
        Ok(s)
    }
}

impl std::fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "VertexSet({}/{}: {:?})", self.count(), self.len, self.runs())
    }
}

#[derive(Serialize, Deserialize)]
struct Rle {
    len: usize,
    runs: Vec<(usize, usize)>,
}

impl Serialize for VertexSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        Rle { len: self.len, runs: self.runs() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for VertexSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = Rle::deserialize(d)?;
        VertexSet::from_runs(r.len, &r.runs).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_respects_length() {
        let s = VertexSet::full(70);
        assert_eq!(s.count(), 70);
        assert!(s.complement().is_empty());
    }

    proptest! {
        #[test]
        fn rle_roundtrip(len in 1usize..300, picks in proptest::collection::vec(any::<u16>(), 0..80)) {
            let s = VertexSet::from_indices(len, picks.iter().map(|&p| p as usize % len));
            let json = serde_json::to_string(&s).unwrap();
            let back: VertexSet = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn iter_matches_contains(len in 1usize..200, picks in proptest::collection::vec(any::<u8>(), 0..50)) {
            let s = VertexSet::from_indices(len, picks.iter().map(|&p| p as usize % len));
            let listed: Vec<usize> = s.iter().collect();
            let direct: Vec<usize> = (0..len).filter(|&i| s.contains(i)).collect();
            prop_assert_eq!(listed, direct);
        }
    }
}
