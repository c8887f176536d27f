use crate::corpus::Span;

/// Running state of one entity.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityState {
    pub representation: Vec<f64>,
    pub mention_count: usize,
    pub member_spans: Vec<Span>,
}

impl EntityState {
    pub fn new(span: Span, representation: Vec<f64>) -> Self {
        EntityState {
            representation,
            mention_count: 1,
            member_spans: vec![span],
        }
    }

    /// Weighted update `e' = (c·e + x) / (c + 1)`, where `c` is the previous mention count.
    pub fn absorb(&mut self, span: Span, x: &[f64]) {
        let c = self.mention_count as f64;
        for (e, &xi) in self.representation.iter_mut().zip(x) {
            *e = (c * *e + xi) / (c + 1.0);
        }
        self.mention_count += 1;
        self.member_spans.push(span);
    }

    pub fn last_span(&self) -> Span {
        *self.member_spans.last().expect("entity has at least one member")
    }
}
