//! Structured alphabets: letters, a partition into classes, and an optional
//! pairing between unmarked and marked letters.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(pub u32);

impl Letter {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<String>,
    index: HashMap<String, Letter>,
    class_of: Vec<usize>,
    classes: Vec<Vec<Letter>>,
    /// `partner[l]` is the marked copy of an unmarked letter and vice versa.
    partner: Option<Vec<Letter>>,
    marked: Vec<bool>,
}

impl Alphabet {
    /// Letters are numbered in order of appearance; each inner list is one class.
    pub fn from_classes<S: AsRef<str>>(classes: &[Vec<S>]) -> Result<Self> {
        let mut names = Vec::new();
        let mut index = HashMap::new();
        let mut class_of = Vec::new();
        let mut out = Vec::new();
        for (c, class) in classes.iter().enumerate() {
            let mut members = Vec::new();
            for name in class {
                let name = name.as_ref().to_string();
                let l = Letter(names.len() as u32);
                if index.insert(name.clone(), l).is_some() {
                    return Err(Error::DuplicateLetter(name));
                }
                names.push(name);
                class_of.push(c);
                members.push(l);
            }
            out.push(members);
        }
        let marked = vec![false; names.len()];
        Ok(Alphabet { names, index, class_of, classes: out, partner: None, marked })
    }

    /// Every letter in its own class.
    pub fn discrete<S: AsRef<str>>(letters: &[S]) -> Result<Self> {
        let classes: Vec<Vec<&str>> = letters.iter().map(|l| vec![l.as_ref()]).collect();
        Self::from_classes(&classes)
    }

    /// Adds a marked copy `name'` of every letter; marked classes mirror the
    /// unmarked ones and come after them.
    pub fn with_marks<S: AsRef<str>>(classes: &[Vec<S>]) -> Result<Self> {
        let mut all: Vec<Vec<String>> = classes
            .iter()
            .map(|c| c.iter().map(|s| s.as_ref().to_string()).collect())
            .collect();
        let marked: Vec<Vec<String>> =
            all.iter().map(|c| c.iter().map(|s| format!("{s}'")).collect()).collect();
        let n = all.iter().map(Vec::len).sum::<usize>();
        all.extend(marked);
        let mut a = Self::from_classes(&all)?;
        let partner = (0..2 * n)
            .map(|i| Letter(if i < n { (i + n) as u32 } else { (i - n) as u32 }))
            .collect();
        a.partner = Some(partner);
        for m in a.marked.iter_mut().skip(n) {
            *m = true;
        }
        Ok(a)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> + '_ {
        (0..self.names.len() as u32).map(Letter)
    }

    pub fn name(&self, l: Letter) -> &str {
        &self.names[l.index()]
    }

    pub fn lookup(&self, name: &str) -> Option<Letter> {
        self.index.get(name).copied()
    }

    pub fn letter(&self, name: &str) -> Result<Letter> {
        self.lookup(name).ok_or_else(|| Error::UnknownLetter(name.to_string()))
    }

    pub fn class_of(&self, l: Letter) -> usize {
        self.class_of[l.index()]
    }

    pub fn classes(&self) -> &[Vec<Letter>] {
        &self.classes
    }

    pub fn class(&self, c: usize) -> &[Letter] {
        &self.classes[c]
    }

    pub fn same_class(&self, a: Letter, b: Letter) -> bool {
        self.class_of(a) == self.class_of(b)
    }

    pub fn has_marks(&self) -> bool {
        self.partner.is_some()
    }

    pub fn is_marked(&self, l: Letter) -> bool {
        self.marked[l.index()]
    }

    /// Unmarked version of `l` (identity on unmarked letters).
    pub fn erase(&self, l: Letter) -> Result<Letter> {
        let p = self.partner.as_ref().ok_or(Error::NoMarks)?;
        Ok(if self.marked[l.index()] { p[l.index()] } else { l })
    }

    /// Marked version of `l` (identity on marked letters).
    pub fn mark(&self, l: Letter) -> Result<Letter> {
        let p = self.partner.as_ref().ok_or(Error::NoMarks)?;
        Ok(if self.marked[l.index()] { l } else { p[l.index()] })
    }

    pub fn format_word(&self, w: &[Letter]) -> String {
        if w.is_empty() {
            return "1".into();
        }
        w.iter().map(|&l| self.name(l)).collect::<Vec<_>>().join(" ")
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .classes
            .iter()
            .map(|c| format!("{{{}}}", c.iter().map(|&l| self.name(l)).collect::<Vec<_>>().join(",")))
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}
