//! Joe-Kuo direction numbers for Sobol' dimensions 2..=21.
//!
//! Rows are (s, a, m) where s is the degree of the primitive polynomial,
//! a encodes its interior coefficients, and m holds the s initial direction
//! numbers. Dimension 1 is the van der Corput sequence (all m_j = 1) and
//! needs no table entry.

/// One table row: polynomial degree, interior coefficient bits, initial m's.
pub(crate) struct DirectionRow {
    pub s: u32,
    pub a: u32,
    pub m: &'static [u32],
}

/// Highest dimension covered by [`TABLE`] plus the van der Corput dimension.
pub(crate) const MAX_DIM: usize = 21;

/// Direction-number rows for dimensions 2..=21, in order.
pub(crate) const TABLE: [DirectionRow; 20] = [
    DirectionRow { s: 1, a: 0, m: &[1] },
    DirectionRow { s: 2, a: 1, m: &[1, 3] },
    DirectionRow { s: 3, a: 1, m: &[1, 3, 1] },
    DirectionRow { s: 3, a: 2, m: &[1, 1, 1] },
    DirectionRow { s: 4, a: 1, m: &[1, 1, 3, 3] },
    DirectionRow { s: 4, a: 4, m: &[1, 3, 5, 13] },
    DirectionRow { s: 5, a: 2, m: &[1, 1, 5, 5, 17] },
    DirectionRow { s: 5, a: 4, m: &[1, 1, 5, 5, 5] },
    DirectionRow { s: 5, a: 7, m: &[1, 1, 7, 11, 19] },
    DirectionRow { s: 5, a: 11, m: &[1, 1, 5, 1, 1] },
    DirectionRow { s: 5, a: 13, m: &[1, 1, 1, 3, 11] },
    DirectionRow { s: 5, a: 14, m: &[1, 3, 5, 5, 31] },
    DirectionRow { s: 6, a: 1, m: &[1, 3, 3, 9, 7, 49] },
    DirectionRow { s: 6, a: 13, m: &[1, 1, 1, 15, 21, 21] },
    DirectionRow { s: 6, a: 16, m: &[1, 3, 1, 13, 27, 49] },
    DirectionRow { s: 6, a: 19, m: &[1, 1, 1, 15, 7, 5] },
    DirectionRow { s: 6, a: 22, m: &[1, 3, 1, 15, 13, 25] },
    DirectionRow { s: 6, a: 25, m: &[1, 1, 5, 5, 19, 61] },
    DirectionRow { s: 7, a: 1, m: &[1, 3, 7, 11, 23, 15, 103] },
    DirectionRow { s: 7, a: 4, m: &[1, 3, 7, 13, 13, 15, 69] },
];
