use crate::corpus::Span;

use super::EntityState;

pub const COUNT_BUCKETS: usize = 7;
pub const DISTANCE_BUCKETS: usize = 10;

/// Raw pair features between a span and an entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairFeatures {
    /// Mentions already in the entity.
    pub mention_count: usize,
    /// Tokens strictly between the entity's last mention and the span (0 when they touch or overlap).
    pub distance: usize,
}

impl PairFeatures {
    pub fn between(span: Span, entity: &EntityState) -> PairFeatures {
        let last = entity.last_span();
        PairFeatures {
            mention_count: entity.mention_count,
            distance: span.start.saturating_sub(last.end + 1),
        }
    }

    pub fn count_bucket(&self) -> usize {
        count_bucket(self.mention_count)
    }

    pub fn distance_bucket(&self) -> usize {
        distance_bucket(self.distance)
    }
}

/// Buckets {1, 2, 3, 4, 5–7, 8–15, 16+}; 0 shares the first bucket.
pub fn count_bucket(n: usize) -> usize {
    match n {
        0..=1 => 0,
        2 => 1,
        3 => 2,
        4 => 3,
        5..=7 => 4,
        8..=15 => 5,
        _ => 6,
    }
}

/// Buckets {0–15, 16–31, 32–63, …, 2048–4095, ≥4096}.
pub fn distance_bucket(d: usize) -> usize {
    if d < 16 {
        0
    } else {
        let log2 = (usize::BITS - 1 - d.leading_zeros()) as usize;
        (log2 - 3).min(DISTANCE_BUCKETS - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_buckets() {
        let got: Vec<usize> = [1, 2, 3, 4, 5, 7, 8, 15, 16, 100].iter().map(|&n| count_bucket(n)).collect();
        assert_eq!(got, vec![0, 1, 2, 3, 4, 4, 5, 5, 6, 6]);
    }

    #[test]
    fn distance_buckets() {
        let cases = [(0, 0), (15, 0), (16, 1), (31, 1), (32, 2), (63, 2), (64, 3), (2047, 7), (2048, 8), (4095, 8), (4096, 9), (1 << 20, 9)];
        for (d, b) in cases {
            assert_eq!(distance_bucket(d), b, "distance {d}");
        }
    }

    #[test]
    fn distance_from_last_mention() {
        let mut e = EntityState::new(Span::new(2, 3), vec![1.0]);
        e.absorb(Span::new(10, 11), &[1.0]);
        let f = PairFeatures::between(Span::new(30, 30), &e);
        assert_eq!(f.mention_count, 2);
        assert_eq!(f.distance, 18);
        assert_eq!(PairFeatures::between(Span::new(11, 12), &e).distance, 0);
    }
}
