//! Admissible ranges of `q` under the known Lipschitz and boundedness
//! restrictions, in exact rational arithmetic.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_rational::Ratio;
use serde::{Serialize, Serializer};

use crate::error::{out_of_range, Result};

pub type Rational = Ratio<i64>;

fn serialize_rational<S: Serializer>(r: &Rational, s: S) -> core::result::Result<S::Ok, S::Error> {
    s.collect_str(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// `q/p < 1 + 2/N`
    Marcellini,
    /// `q/p < 1 + min{1, 2/(N-1)}`
    BellaSchaffner,
    /// `1/p - 1/q ≤ 1/(N-1)`, the sharp boundedness condition
    HirschSchaffner,
    /// `q < p + 2` intersected with the boundedness condition
    ThisPaperCombined,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [
        Criterion::Marcellini,
        Criterion::BellaSchaffner,
        Criterion::HirschSchaffner,
        Criterion::ThisPaperCombined,
    ];

    /// Row order of the published table.
    pub const TABLE_ROWS: [Criterion; 3] = [
        Criterion::ThisPaperCombined,
        Criterion::BellaSchaffner,
        Criterion::HirschSchaffner,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Marcellini => "marcellini",
            Criterion::BellaSchaffner => "bella_schaffner",
            Criterion::HirschSchaffner => "hirsch_schaffner",
            Criterion::ThisPaperCombined => "this_paper_combined",
        }
    }

    pub fn from_name(name: &str) -> Option<Criterion> {
        Criterion::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Upper {
    Finite {
        #[serde(serialize_with = "serialize_rational")]
        value: Rational,
        closed: bool,
    },
    Infinite {
        closed: bool,
    },
}

impl Upper {
    pub fn is_closed(&self) -> bool {
        match *self {
            Upper::Finite { closed, .. } | Upper::Infinite { closed } => closed,
        }
    }

    pub fn value(&self) -> Option<Rational> {
        match *self {
            Upper::Finite { value, .. } => Some(value),
            Upper::Infinite { .. } => None,
        }
    }

    fn admits(&self, q: Rational) -> bool {
        match *self {
            Upper::Finite { value, closed } => q < value || closed && q == value,
            Upper::Infinite { .. } => true,
        }
    }

    /// Orders bounds by the set of finite `q` they admit, ties broken by
    /// closedness.
    #[cfg(test)]
    fn key(&self) -> (bool, Rational, bool) {
        match *self {
            Upper::Finite { value, closed } => (false, value, closed),
            Upper::Infinite { closed } => (true, Rational::from_integer(0), closed),
        }
    }
}

/// Range of `q`: closed at the lower end `p`, upper end per criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QInterval {
    #[serde(serialize_with = "serialize_rational")]
    pub lower: Rational,
    pub upper: Upper,
}

impl QInterval {
    pub fn contains(&self, q: Rational) -> bool {
        q >= self.lower && self.upper.admits(q)
    }

    pub fn is_empty(&self) -> bool {
        match self.upper {
            Upper::Finite { value, closed } => value < self.lower || !closed && value == self.lower,
            Upper::Infinite { .. } => false,
        }
    }

    /// Whether every finite `q` admitted here is admitted by `other`.
    pub fn is_subset_of(&self, other: &QInterval) -> bool {
        if self.is_empty() {
            return true;
        }
        if self.lower < other.lower {
            return false;
        }
        match (self.upper, other.upper) {
            (_, Upper::Infinite { .. }) => true,
            (Upper::Infinite { .. }, Upper::Finite { .. }) => false,
            (Upper::Finite { value: a, closed: ca }, Upper::Finite { value: b, closed: cb }) => {
                a < b || a == b && (cb || !ca)
            }
        }
    }

    /// Cell text as printed in the table: `q < 4`, `q ≤ 10/3`, or the
    /// unrestricted forms `q ∈ (1, ∞]` and `q ∈ (1, ∞)`.
    pub fn table_text(&self) -> String {
        match self.upper {
            Upper::Finite { value, closed: true } => alloc::format!("q ≤ {value}"),
            Upper::Finite { value, closed: false } => alloc::format!("q < {value}"),
            Upper::Infinite { closed: true } => "q ∈ (1, ∞]".to_string(),
            Upper::Infinite { closed: false } => "q ∈ (1, ∞)".to_string(),
        }
    }
}

fn int(v: i64) -> Rational {
    Rational::from_integer(v)
}

fn check_p(p: Rational, n_dim: u32) -> Result<()> {
    if p < int(2) {
        return Err(out_of_range(alloc::format!("p must be at least 2, got {p}")));
    }
    if n_dim < 2 {
        return Err(out_of_range(alloc::format!(
            "dimension must be at least 2, got {n_dim}"
        )));
    }
    Ok(())
}

/// `(N-1)p/(N-1-p)` when `p < N - 1`; `None` when the boundedness condition
/// puts no restriction on `q`.
pub fn boundedness_threshold(p: Rational, n_dim: u32) -> Option<Rational> {
    let n1 = int(n_dim as i64 - 1);
    if p < n1 {
        Some(n1 * p / (n1 - p))
    } else {
        None
    }
}

pub fn admissible_interval(criterion: Criterion, p: Rational, n_dim: u32) -> Result<QInterval> {
    check_p(p, n_dim)?;
    let n = int(n_dim as i64);
    let one = int(1);
    let upper = match criterion {
        Criterion::Marcellini => Upper::Finite {
            value: p * (one + int(2) / n),
            closed: false,
        },
        Criterion::BellaSchaffner => {
            let gain = core::cmp::min(one, int(2) / (n - one));
            Upper::Finite {
                value: p * (one + gain),
                closed: false,
            }
        }
        Criterion::HirschSchaffner => hirsch_schaffner_upper(p, n_dim),
        Criterion::ThisPaperCombined => {
            let lipschitz = p + int(2);
            match hirsch_schaffner_upper(p, n_dim) {
                Upper::Finite { value, .. } if value < lipschitz => Upper::Finite {
                    value,
                    closed: true,
                },
                _ => Upper::Finite {
                    value: lipschitz,
                    closed: false,
                },
            }
        }
    };
    Ok(QInterval { lower: p, upper })
}

fn hirsch_schaffner_upper(p: Rational, n_dim: u32) -> Upper {
    match boundedness_threshold(p, n_dim) {
        Some(value) => Upper::Finite {
            value,
            closed: true,
        },
        // q = ∞ is admitted when p > N - 1 and excluded at p = N - 1
        None => Upper::Infinite {
            closed: p > int(n_dim as i64 - 1),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub lipschitz_by_paper: bool,
    pub lipschitz_by_bs: bool,
    pub lipschitz_by_marcellini: bool,
    pub bounded_by_hs: bool,
    /// `p < N - 1` and `q > (N-1)p/(N-1-p)`
    pub unbounded_risk: bool,
}

pub fn classify(p: Rational, q: Rational, n_dim: u32) -> Result<Classification> {
    check_p(p, n_dim)?;
    if q < p {
        return Err(out_of_range(alloc::format!("q = {q} is below p = {p}")));
    }
    let inside = |c| admissible_interval(c, p, n_dim).map(|i| i.contains(q));
    Ok(Classification {
        lipschitz_by_paper: inside(Criterion::ThisPaperCombined)?,
        lipschitz_by_bs: inside(Criterion::BellaSchaffner)?,
        lipschitz_by_marcellini: inside(Criterion::Marcellini)?,
        bounded_by_hs: inside(Criterion::HirschSchaffner)?,
        unbounded_risk: boundedness_threshold(p, n_dim).is_some_and(|t| q > t),
    })
}

/// `N > p(p+2)/2 + 1`: the combined restriction is sharp.
pub fn sharpness_region(p: Rational, n_dim: u32) -> bool {
    int(n_dim as i64) > p * (p + int(2)) / int(2) + int(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableCell {
    pub criterion: Criterion,
    #[serde(serialize_with = "serialize_rational")]
    pub p: Rational,
    pub n_dim: u32,
    pub interval: QInterval,
    pub text: String,
    pub shaded: bool,
}

fn shaded(criterion: Criterion, p: Rational, n_dim: u32) -> bool {
    match criterion {
        Criterion::HirschSchaffner => true,
        Criterion::ThisPaperCombined => sharpness_region(p, n_dim),
        Criterion::BellaSchaffner | Criterion::Marcellini => false,
    }
}

/// Cells ordered by `p`, then table row, then `N`.
pub fn render_table(p_list: &[Rational], n_list: &[u32]) -> Result<Vec<TableCell>> {
    if p_list.is_empty() || n_list.is_empty() {
        return Err(out_of_range("table needs at least one p and one N"));
    }
    let mut cells = Vec::with_capacity(p_list.len() * n_list.len() * 3);
    for &p in p_list {
        for criterion in Criterion::TABLE_ROWS {
            for &n_dim in n_list {
                let interval = admissible_interval(criterion, p, n_dim)?;
                cells.push(TableCell {
                    criterion,
                    p,
                    n_dim,
                    text: interval.table_text(),
                    interval,
                    shaded: shaded(criterion, p, n_dim),
                });
            }
        }
    }
    Ok(cells)
}

pub const TABLE1_P: [i64; 3] = [2, 3, 4];
pub const TABLE1_N: [u32; 6] = [2, 3, 4, 5, 6, 7];

/// Table 1 as published, one line per row. A leading `*` marks a shaded cell.
pub const TABLE1_GOLDEN: &str = "\
2 this_paper_combined | q < 4 | q < 4 | q < 4 | q < 4 | *q ≤ 10/3 | *q ≤ 3
2 bella_schaffner | q < 4 | q < 4 | q < 10/3 | q < 3 | q < 14/5 | q < 8/3
2 hirsch_schaffner | *q ∈ (1, ∞] | *q ∈ (1, ∞) | *q ≤ 6 | *q ≤ 4 | *q ≤ 10/3 | *q ≤ 3
3 this_paper_combined | q < 5 | q < 5 | q < 5 | q < 5 | q < 5 | q < 5
3 bella_schaffner | q < 6 | q < 6 | q < 5 | q < 9/2 | q < 21/5 | q < 4
3 hirsch_schaffner | *q ∈ (1, ∞] | *q ∈ (1, ∞] | *q ∈ (1, ∞) | *q ≤ 12 | *q ≤ 15/2 | *q ≤ 6
4 this_paper_combined | q < 6 | q < 6 | q < 6 | q < 6 | q < 6 | q < 6
4 bella_schaffner | q < 8 | q < 8 | q < 20/3 | q < 6 | q < 28/5 | q < 16/3
4 hirsch_schaffner | *q ∈ (1, ∞] | *q ∈ (1, ∞] | *q ∈ (1, ∞] | *q ∈ (1, ∞) | *q ≤ 20 | *q ≤ 12
";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GoldenCell {
    pub criterion: Criterion,
    pub p: i64,
    pub n_dim: u32,
    pub text: String,
    pub shaded: bool,
}

/// Parses [`TABLE1_GOLDEN`] into cells in rendering order.
pub fn table1_golden() -> Vec<GoldenCell> {
    let mut out = Vec::with_capacity(54);
    for line in TABLE1_GOLDEN.lines() {
        let mut parts = line.split(" | ");
        let head = parts.next().expect("row header");
        let (p, name) = head.split_once(' ').expect("p and criterion");
        let p: i64 = p.parse().expect("integer p");
        let criterion = Criterion::from_name(name).expect("known criterion");
        for (cell, n_dim) in parts.zip(TABLE1_N) {
            let (shaded, text) = match cell.strip_prefix('*') {
                Some(rest) => (true, rest),
                None => (false, cell),
            };
            out.push(GoldenCell {
                criterion,
                p,
                n_dim,
                text: text.to_string(),
                shaded,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct CellComparison {
    pub expected: GoldenCell,
    pub actual: TableCell,
    pub matches: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Check {
    pub cells: Vec<CellComparison>,
    pub mismatches: usize,
}

impl Table1Check {
    pub fn pass(&self) -> bool {
        self.mismatches == 0 && self.cells.len() == 54
    }
}

/// Renders Table 1 and compares every cell with the embedded golden copy.
pub fn check_table1() -> Table1Check {
    let p_list = TABLE1_P.map(int);
    let rendered = render_table(&p_list, &TABLE1_N).expect("table parameters are valid");
    let golden = table1_golden();
    let cells: Vec<CellComparison> = golden
        .into_iter()
        .zip(rendered)
        .map(|(expected, actual)| {
            let matches = actual.criterion == expected.criterion
                && actual.p == int(expected.p)
                && actual.n_dim == expected.n_dim
                && actual.text == expected.text
                && actual.shaded == expected.shaded;
            CellComparison {
                expected,
                actual,
                matches,
            }
        })
        .collect();
    let mismatches = cells.iter().filter(|c| !c.matches).count();
    Table1Check { cells, mismatches }
}

/// Aligned plain-text rendering, one table row per line, shaded cells
/// marked with `*`.
pub fn format_table_text(cells: &[TableCell]) -> String {
    use core::fmt::Write;
    let mut n_list: Vec<u32> = cells.iter().map(|c| c.n_dim).collect();
    n_list.sort_unstable();
    n_list.dedup();
    let width = cells
        .iter()
        .map(|c| c.text.chars().count() + 1)
        .max()
        .unwrap_or(0)
        .max(6);
    let label = 26;
    let mut out = String::new();
    let _ = write!(out, "{:<label$}", "");
    for n in &n_list {
        let head = alloc::format!("N={n}");
        let _ = write!(out, " | {head:<width$}");
    }
    out.push('\n');
    for row in cells.chunks(n_list.len()) {
        let first = &row[0];
        let _ = write!(out, "{:<label$}", alloc::format!("p={} {}", first.p, first.criterion));
        for c in row {
            let text = if c.shaded {
                alloc::format!("*{}", c.text)
            } else {
                alloc::format!(" {}", c.text)
            };
            let _ = write!(out, " | {text:<width$}");
        }
        out.push('\n');
    }
    out
}
