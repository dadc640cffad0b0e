use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use super::Series;
use crate::alphabet::{Alphabet, Letter};
use crate::error::{Error, Result};

/// Indices are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LeftDetType {
    Empty,
    Unit(usize),
    Class(usize),
    NotLeftDeterministic,
}

#[derive(Clone)]
pub struct SeriesVector {
    alphabet: Arc<Alphabet>,
    entries: Vec<Series>,
}

impl PartialEq for SeriesVector {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Eq for SeriesVector {}

impl Hash for SeriesVector {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.entries.hash(state);
    }
}

impl fmt::Debug for SeriesVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for SeriesVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries.iter().map(Series::to_expr).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

#[derive(Clone, Copy)]
enum Head {
    Dead,
    Eps,
    Class(usize),
    Bad,
}

fn head(s: &Series, q: u32) -> Head {
    if s.is_dead_state(q) {
        return Head::Dead;
    }
    let a = s.alphabet();
    let mut class = None;
    for l in s.live_letters(q) {
        let c = a.class_of(l);
        match class {
            None => class = Some(c),
            Some(c0) if c0 != c => return Head::Bad,
            _ => {}
        }
    }
    match (s.accepts_at(q), class) {
        (true, None) => Head::Eps,
        (true, Some(_)) => Head::Bad,
        (false, Some(c)) => Head::Class(c),
        (false, None) => Head::Dead,
    }
}

fn tuple_type(entries: &[Series], tuple: &[u32]) -> LeftDetType {
    let mut unit = None;
    let mut class = None;
    for (i, (s, &q)) in entries.iter().zip(tuple).enumerate() {
        match head(s, q) {
            Head::Dead => {}
            Head::Bad => return LeftDetType::NotLeftDeterministic,
            Head::Eps => {
                if unit.is_some() {
                    return LeftDetType::NotLeftDeterministic;
                }
                unit = Some(i);
            }
            Head::Class(c) => match class {
                None => class = Some(c),
                Some(c0) if c0 != c => return LeftDetType::NotLeftDeterministic,
                _ => {}
            },
        }
    }
    match (unit, class) {
        (None, None) => LeftDetType::Empty,
        (Some(i), None) => LeftDetType::Unit(i),
        (None, Some(c)) => LeftDetType::Class(c),
        (Some(_), Some(_)) => LeftDetType::NotLeftDeterministic,
    }
}

impl SeriesVector {
    pub fn from_entries(alphabet: Arc<Alphabet>, entries: Vec<Series>) -> Self {
        SeriesVector { alphabet, entries }
    }

    pub fn scalar(s: Series) -> Self {
        SeriesVector { alphabet: s.alphabet().clone(), entries: vec![s] }
    }

    pub fn empty(alphabet: &Arc<Alphabet>, width: usize) -> Self {
        SeriesVector { alphabet: alphabet.clone(), entries: vec![Series::empty(alphabet); width] }
    }

    pub fn unit(alphabet: &Arc<Alphabet>, width: usize, i: usize) -> Self {
        let mut v = Self::empty(alphabet, width);
        v.entries[i] = Series::epsilon(alphabet);
        v
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn width(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Series] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> &Series {
        &self.entries[i]
    }

    pub fn into_entries(self) -> Vec<Series> {
        self.entries
    }

    pub fn map(&self, f: impl Fn(&Series) -> Series) -> Self {
        SeriesVector { alphabet: self.alphabet.clone(), entries: self.entries.iter().map(f).collect() }
    }

    pub fn try_map(&self, f: impl Fn(&Series) -> Result<Series>) -> Result<Self> {
        let entries = self.entries.iter().map(f).collect::<Result<Vec<_>>>()?;
        Ok(SeriesVector { alphabet: self.alphabet.clone(), entries })
    }

    pub fn is_empty_vector(&self) -> bool {
        self.entries.iter().all(Series::is_empty)
    }

    /// `Some(i)` when this is the unit vector with ε at index `i`.
    pub fn unit_index(&self) -> Option<usize> {
        match self.left_det_type() {
            LeftDetType::Unit(i) => Some(i),
            _ => None,
        }
    }

    fn check_width(&self, other: &Self) -> Result<()> {
        if self.width() != other.width() {
            return Err(Error::Dimension(format!("widths {} and {}", self.width(), other.width())));
        }
        Ok(())
    }

    pub fn sum(&self, other: &Self) -> Result<Self> {
        self.check_width(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a.sum(b)).collect();
        Ok(SeriesVector { alphabet: self.alphabet.clone(), entries })
    }

    /// `s · self`, entrywise.
    pub fn left_scale(&self, s: &Series) -> Self {
        self.map(|e| s.product(e))
    }

    /// Row vector times matrix.
    pub fn mul(&self, m: &SeriesMatrix) -> Result<Self> {
        if self.width() != m.num_rows() {
            return Err(Error::Dimension(format!(
                "row of width {} times matrix with {} rows",
                self.width(),
                m.num_rows()
            )));
        }
        let mut acc = SeriesVector::empty(&self.alphabet, m.num_cols());
        for (s, row) in self.entries.iter().zip(m.rows()) {
            if s.is_empty() {
                continue;
            }
            acc = acc.sum(&row.left_scale(s))?;
        }
        Ok(acc)
    }

    pub fn residual(&self, w: &[Letter]) -> Self {
        self.map(|s| s.residual(w))
    }

    pub fn residual_letter(&self, l: Letter) -> Self {
        self.map(|s| s.residual_letter(l))
    }

    fn root(&self) -> Vec<u32> {
        vec![0; self.width()]
    }

    fn step(&self, t: &[u32], l: Letter) -> Vec<u32> {
        self.entries.iter().zip(t).map(|(s, &q)| s.next(q, l)).collect()
    }

    /// All reachable state tuples, root first.
    fn tuples(&self) -> Vec<Vec<u32>> {
        let mut seen: HashSet<Vec<u32>> = HashSet::new();
        let mut queue = vec![self.root()];
        seen.insert(self.root());
        let mut i = 0;
        while i < queue.len() {
            let t = queue[i].clone();
            for l in self.alphabet.letters() {
                let n = self.step(&t, l);
                if seen.insert(n.clone()) {
                    queue.push(n);
                }
            }
            i += 1;
        }
        queue
    }

    fn materialize(&self, t: &[u32]) -> Self {
        let entries = self.entries.iter().zip(t).map(|(s, &q)| s.rerooted(q)).collect();
        SeriesVector { alphabet: self.alphabet.clone(), entries }
    }

    /// Number of distinct residual vectors.
    pub fn norm(&self) -> usize {
        self.tuples().len()
    }

    pub fn residual_set(&self) -> Vec<SeriesVector> {
        self.tuples().iter().map(|t| self.materialize(t)).collect()
    }

    pub fn left_det_type(&self) -> LeftDetType {
        tuple_type(&self.entries, &self.root())
    }

    pub fn is_deterministic(&self) -> bool {
        self.tuples()
            .iter()
            .all(|t| tuple_type(&self.entries, t) != LeftDetType::NotLeftDeterministic)
    }

    /// Splits a class-headed vector as `Σ_k E_k·Φ_k` with `E_k` ranging over
    /// the class in alphabet order and `Φ_k = self • E_k`.
    pub fn decompose_head(&self) -> Result<(Vec<Letter>, SeriesMatrix)> {
        match self.left_det_type() {
            LeftDetType::Class(c) => {
                let letters = self.alphabet.class(c).to_vec();
                let rows = letters.iter().map(|&l| self.residual_letter(l)).collect();
                Ok((letters, SeriesMatrix::from_rows(self.alphabet.clone(), rows, self.width())?))
            }
            other => Err(Error::NotClassHead(format!("{other:?}"))),
        }
    }

    /// `c_j = a_j + a_{j0}·b_j` for `j ≠ j0`, `c_{j0} = ∅`.
    pub fn nabla(&self, b: &Self, j0: usize) -> Result<Self> {
        self.check_width(b)?;
        if j0 >= self.width() {
            return Err(Error::IndexOutOfRange { index: j0, width: self.width() });
        }
        let a0 = &self.entries[j0];
        let entries = (0..self.width())
            .map(|j| {
                if j == j0 {
                    Series::empty(&self.alphabet)
                } else {
                    self.entries[j].sum(&a0.product(&b.entries[j]))
                }
            })
            .collect();
        Ok(SeriesVector { alphabet: self.alphabet.clone(), entries })
    }

    /// `a'_j = a_{j0}*·a_j` for `j ≠ j0`, `a'_{j0} = ∅`.
    pub fn nabla_star(&self, j0: usize) -> Result<Self> {
        if j0 >= self.width() {
            return Err(Error::IndexOutOfRange { index: j0, width: self.width() });
        }
        let st = self.entries[j0].star();
        let entries = (0..self.width())
            .map(|j| if j == j0 { Series::empty(&self.alphabet) } else { st.product(&self.entries[j]) })
            .collect();
        Ok(SeriesVector { alphabet: self.alphabet.clone(), entries })
    }

    /// No nonempty word `u` with `self • u = self`.
    pub fn is_loop_free(&self) -> bool {
        let root = self.root();
        let mut seen: HashSet<Vec<u32>> = HashSet::new();
        let mut queue: Vec<Vec<u32>> = Vec::new();
        for l in self.alphabet.letters() {
            let n = self.step(&root, l);
            if seen.insert(n.clone()) {
                queue.push(n);
            }
        }
        let mut i = 0;
        while i < queue.len() {
            if queue[i] == root {
                return false;
            }
            let t = queue[i].clone();
            for l in self.alphabet.letters() {
                let n = self.step(&t, l);
                if seen.insert(n.clone()) {
                    queue.push(n);
                }
            }
            i += 1;
        }
        true
    }

    pub fn erase_marks(&self) -> Result<Self> {
        self.try_map(Series::erase_marks)
    }

    pub fn add_marks(&self) -> Result<Self> {
        self.try_map(Series::add_marks)
    }

    pub fn is_unmarked(&self) -> bool {
        self.entries.iter().all(Series::is_unmarked)
    }

    /// Concatenation of two rows into one wider row.
    pub fn concat(&self, other: &Self) -> Self {
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().cloned());
        SeriesVector { alphabet: self.alphabet.clone(), entries }
    }
}

#[derive(Clone, Debug)]
pub struct SeriesMatrix {
    alphabet: Arc<Alphabet>,
    rows: Vec<SeriesVector>,
    cols: usize,
}

impl PartialEq for SeriesMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.cols == other.cols && self.rows == other.rows
    }
}

impl Eq for SeriesMatrix {}

impl SeriesMatrix {
    pub fn from_rows(alphabet: Arc<Alphabet>, rows: Vec<SeriesVector>, cols: usize) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.width() != cols) {
            return Err(Error::Dimension(format!("row of width {} in matrix with {cols} columns", r.width())));
        }
        Ok(SeriesMatrix { alphabet, rows, cols })
    }

    pub fn identity(alphabet: &Arc<Alphabet>, n: usize) -> Self {
        let rows = (0..n).map(|i| SeriesVector::unit(alphabet, n, i)).collect();
        SeriesMatrix { alphabet: alphabet.clone(), rows, cols: n }
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> &[SeriesVector] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &SeriesVector {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> &Series {
        self.rows[i].get(j)
    }

    pub fn product(&self, other: &SeriesMatrix) -> Result<SeriesMatrix> {
        let rows = self.rows.iter().map(|r| r.mul(other)).collect::<Result<Vec<_>>>()?;
        SeriesMatrix::from_rows(self.alphabet.clone(), rows, other.cols)
    }

    pub fn sum(&self, other: &SeriesMatrix) -> Result<SeriesMatrix> {
        if self.num_rows() != other.num_rows() {
            return Err(Error::Dimension("row counts differ".into()));
        }
        let rows = self.rows.iter().zip(&other.rows).map(|(a, b)| a.sum(b)).collect::<Result<Vec<_>>>()?;
        SeriesMatrix::from_rows(self.alphabet.clone(), rows, self.cols)
    }

    pub fn residual(&self, w: &[Letter]) -> SeriesMatrix {
        let rows = self.rows.iter().map(|r| r.residual(w)).collect();
        SeriesMatrix { alphabet: self.alphabet.clone(), rows, cols: self.cols }
    }

    pub fn is_deterministic(&self) -> bool {
        self.rows.iter().all(SeriesVector::is_deterministic)
    }

    /// Cardinality of the union of the rows' residual sets.
    pub fn norm(&self) -> usize {
        let mut all: HashSet<SeriesVector> = HashSet::new();
        for r in &self.rows {
            all.extend(r.residual_set());
        }
        all.len()
    }

    /// Star of a 1×1 matrix.
    pub fn star(&self) -> Result<SeriesMatrix> {
        if self.num_rows() != 1 || self.cols != 1 {
            return Err(Error::Dimension("star is only defined on 1×1 matrices".into()));
        }
        let s = self.get(0, 0).star();
        Ok(SeriesMatrix {
            alphabet: self.alphabet.clone(),
            rows: vec![SeriesVector::scalar(s)],
            cols: 1,
        })
    }

    /// Vertical stacking of two matrices with the same column count.
    pub fn stack(&self, other: &SeriesMatrix) -> Result<SeriesMatrix> {
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        SeriesMatrix::from_rows(self.alphabet.clone(), rows, self.cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{parse_series, parse_vector};

    fn alpha() -> Arc<Alphabet> {
        Arc::new(
            Alphabet::from_classes(&[vec!["A", "B"], vec!["C"], vec!["X", "Y", "Z"]]).unwrap(),
        )
    }

    fn v(text: &str) -> SeriesVector {
        parse_vector(text, &alpha(), 1, 1).unwrap()
    }

    #[test]
    fn left_det_types() {
        assert_eq!(v("[0,0,0]").left_det_type(), LeftDetType::Empty);
        assert_eq!(v("[0,1,0]").left_det_type(), LeftDetType::Unit(1));
        assert_eq!(v("[A X + B Y, C Z]").left_det_type(), LeftDetType::NotLeftDeterministic);
        assert_eq!(v("[A X, B Y]").left_det_type(), LeftDetType::Class(0));
        assert_eq!(v("[1, 1]").left_det_type(), LeftDetType::NotLeftDeterministic);
    }

    #[test]
    fn determinism() {
        assert!(v("[0,1,0]").is_deterministic());
        assert!(v("[A X + B Y]").is_deterministic());
        assert!(!v("[A + 1]").is_deterministic());
        assert!(!v("[A (C + X)]").is_deterministic());
        assert!(v("[A (X C + Y), B]").is_deterministic());
    }

    #[test]
    fn decompose_reads_residuals() {
        let (letters, phi) = v("[A X + B Y]").decompose_head().unwrap();
        assert_eq!(letters.len(), 2);
        assert_eq!(phi.row(0), &v("[X]"));
        assert_eq!(phi.row(1), &v("[Y]"));
        let (_, phi) = v("[A X]").decompose_head().unwrap();
        assert_eq!(phi.row(1), &v("[0]"));
        assert!(v("[1]").decompose_head().is_err());
    }

    #[test]
    fn nabla_examples() {
        assert_eq!(v("[1, 0]").nabla(&v("[X, Y]"), 0).unwrap(), v("[0, Y]"));
        assert_eq!(v("[0, A]").nabla(&v("[X, Y]"), 0).unwrap(), v("[0, A]"));
        assert_eq!(v("[0, A]").nabla_star(0).unwrap(), v("[0, A]"));
        assert_eq!(v("[1, A]").nabla_star(0).unwrap(), v("[0, A]"));
        assert_eq!(v("[A, B]").nabla_star(0).unwrap(), v("[0, A* B]"));
        assert!(v("[A]").nabla_star(3).is_err());
        assert!(v("[A]").nabla(&v("[A, B]"), 0).is_err());
    }

    #[test]
    fn matrix_product_and_norm() {
        let a = alpha();
        let row = v("[A, B]");
        let m = SeriesMatrix::from_rows(a.clone(), vec![v("[X, 0]"), v("[0, Y]")], 2).unwrap();
        assert_eq!(row.mul(&m).unwrap(), v("[A X, B Y]"));
        assert!(row.mul(&SeriesMatrix::identity(&a, 3)).is_err());
        assert_eq!(row.mul(&SeriesMatrix::identity(&a, 2)).unwrap(), row);
        // residuals of [A,B]: itself, [1,0], [0,1], [0,0]
        assert_eq!(row.norm(), 4);
        assert_eq!(SeriesMatrix::identity(&a, 2).norm(), 3);
        assert_eq!(parse_series("A B", &a).unwrap().norm(), 4);
    }
}
