use crate::error::{Error, Result};

/// Context of sample `x_i`: the delayed state `y_{i-d}` and the `d - 1`
/// symbols `x_{i-d+1}, ..., x_{i-1}`. With `d = 0` the context is `y_i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContextKey {
    pub y_delayed: usize,
    pub x_history: Vec<usize>,
}

/// Enumerates contexts in lexicographic order of `(y_delayed, x_history)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextPartition {
    d: usize,
    x_size: usize,
    y_size: usize,
    history_count: usize,
}

impl ContextPartition {
    pub fn new(d: usize, x_size: usize, y_size: usize) -> Result<Self> {
        let history_count = (x_size as u128)
            .checked_pow(d.saturating_sub(1) as u32)
            .filter(|c| c.saturating_mul(y_size as u128) <= usize::MAX as u128 / 2)
            .ok_or(Error::Capacity {
                required: u128::MAX,
                cap: usize::MAX as u128 / 2,
            })? as usize;
        Ok(Self {
            d,
            x_size,
            y_size,
            history_count,
        })
    }

    pub fn delay(&self) -> usize {
        self.d
    }

    pub fn count(&self) -> usize {
        self.y_size * self.history_count
    }

    pub fn history_len(&self) -> usize {
        self.d.saturating_sub(1)
    }

    pub fn index(&self, key: &ContextKey) -> usize {
        let h = key.x_history.iter().fold(0, |acc, &x| acc * self.x_size + x);
        key.y_delayed * self.history_count + h
    }

    pub fn key(&self, index: usize) -> ContextKey {
        let mut h = index % self.history_count;
        let mut x_history = vec![0; self.history_len()];
        for slot in x_history.iter_mut().rev() {
            *slot = h % self.x_size;
            h /= self.x_size;
        }
        ContextKey {
            y_delayed: index / self.history_count,
            x_history,
        }
    }

    /// Context of step `i` (1-based) given the side-information symbol
    /// `y_{i-d}` (already filled if out of range) and all earlier `x`.
    pub(crate) fn at(&self, i: usize, y_delayed: usize, x_before: &[usize], x_fill: usize) -> usize {
        let mut h = 0;
        // positions i-d+1 ..= i-1, 1-based; out of range uses the fill
        for k in 1..self.d {
            let pos = i as isize - self.d as isize + k as isize;
            let x = if pos >= 1 { x_before[pos as usize - 1] } else { x_fill };
            h = h * self.x_size + x;
        }
        y_delayed * self.history_count + h
    }

    /// Context index of every position of `x`, with `y` the full state
    /// sequence and out-of-range positions filled.
    pub fn assign(&self, x: &[usize], y: &[usize], x_fill: usize, y_fill: usize) -> Vec<usize> {
        (1..=x.len())
            .map(|i| {
                let yd = if i > self.d { y[i - self.d - 1] } else { y_fill };
                self.at(i, yd, &x[..i - 1], x_fill)
            })
            .collect()
    }

    /// 1-based positions of each context, contexts in canonical order.
    pub fn substream_indices(&self, x: &[usize], y: &[usize], x_fill: usize, y_fill: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count()];
        for (i, c) in self.assign(x, y, x_fill, y_fill).into_iter().enumerate() {
            out[c].push(i + 1);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_and_key_are_inverse() {
        let p = ContextPartition::new(3, 3, 2).unwrap();
        assert_eq!(p.count(), 18);
        for c in 0..p.count() {
            assert_eq!(p.index(&p.key(c)), c);
        }
        assert_eq!(
            p.key(9 + 2 * 3 + 1),
            ContextKey {
                y_delayed: 1,
                x_history: vec![2, 1]
            }
        );
    }

    #[test]
    fn small_delays() {
        let p0 = ContextPartition::new(0, 2, 3).unwrap();
        assert_eq!(p0.count(), 3);
        assert_eq!(p0.assign(&[1, 0], &[2, 1], 0, 0), vec![2, 1]);
        let p1 = ContextPartition::new(1, 2, 3).unwrap();
        assert_eq!(p1.assign(&[1, 0, 1], &[2, 1, 0], 0, 0), vec![0, 2, 1]);
    }
}
