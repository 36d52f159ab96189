//! Points of interest and stack frame descriptors.
//!
//! A POI identifies one expression occurrence in one source file by
//! `(module, line, kind, occurrence)` and renders in reports as the
//! 4-tuple literal, e.g. `{'merge.mf',16,call,1}`.

use std::fmt;

/// Expression kind tag used to select POIs within a line.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PoiKind {
    Call,
    Case,
    If,
    /// A use of the named variable, e.g. `{var,'A'}`.
    Var(String),
    Match,
    Op,
    Tuple,
    List,
    /// List comprehension.
    Lc,
    Fun,
    Try,
    Integer,
    Atom,
    String,
}

impl PoiKind {
    /// Parse a kind tag from its config-file atom name.
    pub fn from_atom(name: &str) -> Option<PoiKind> {
        Some(match name {
            "call" => PoiKind::Call,
            "case" => PoiKind::Case,
            "if" => PoiKind::If,
            "match" => PoiKind::Match,
            "op" => PoiKind::Op,
            "tuple" => PoiKind::Tuple,
            "list" => PoiKind::List,
            "lc" => PoiKind::Lc,
            "fun" => PoiKind::Fun,
            "try" => PoiKind::Try,
            "integer" => PoiKind::Integer,
            "atom" => PoiKind::Atom,
            "string" => PoiKind::String,
            _ => return None,
        })
    }
}

impl fmt::Display for PoiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoiKind::Call => write!(f, "call"),
            PoiKind::Case => write!(f, "'case'"),
            PoiKind::If => write!(f, "'if'"),
            PoiKind::Var(name) => write!(f, "{{var,'{}'}}", name),
            PoiKind::Match => write!(f, "match"),
            PoiKind::Op => write!(f, "op"),
            PoiKind::Tuple => write!(f, "tuple"),
            PoiKind::List => write!(f, "list"),
            PoiKind::Lc => write!(f, "lc"),
            PoiKind::Fun => write!(f, "'fun'"),
            PoiKind::Try => write!(f, "'try'"),
            PoiKind::Integer => write!(f, "integer"),
            PoiKind::Atom => write!(f, "atom"),
            PoiKind::String => write!(f, "string"),
        }
    }
}

/// One point of interest: an expression occurrence in one source file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Poi {
    /// Module name or source file name, e.g. `align_columns_ok.mf`.
    pub module: String,
    /// 1-based source line of the expression's first token.
    pub line: u32,
    pub kind: PoiKind,
    /// 1-based occurrence of the kind within the line; defaults to 1.
    pub occurrence: u32,
}

impl Poi {
    pub fn new(module: impl Into<String>, line: u32, kind: PoiKind) -> Poi {
        Poi { module: module.into(), line, kind, occurrence: 1 }
    }

    pub fn with_occurrence(mut self, occurrence: u32) -> Poi {
        self.occurrence = occurrence;
        self
    }
}

impl fmt::Display for Poi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{'{}',{},{},{}}}", self.module, self.line, self.kind, self.occurrence)
    }
}

/// Relation between POIs of the old and the new program version.
///
/// A POI may appear in several pairs; one-to-many relations compare the one
/// side against each partner independently.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PoiRelation {
    pub pairs: Vec<(Poi, Poi)>,
}

impl PoiRelation {
    pub fn new(pairs: Vec<(Poi, Poi)>) -> PoiRelation {
        PoiRelation { pairs }
    }

    /// All POIs of the old version, deduplicated, in first-seen order.
    pub fn old_pois(&self) -> Vec<Poi> {
        dedup_keep_order(self.pairs.iter().map(|(o, _)| o.clone()))
    }

    /// All POIs of the new version, deduplicated, in first-seen order.
    pub fn new_pois(&self) -> Vec<Poi> {
        dedup_keep_order(self.pairs.iter().map(|(_, n)| n.clone()))
    }

    /// Whether `old` and `new` are related by some pair.
    pub fn related(&self, old: &Poi, new: &Poi) -> bool {
        self.pairs.iter().any(|(o, n)| o == old && n == new)
    }
}

fn dedup_keep_order(iter: impl Iterator<Item = Poi>) -> Vec<Poi> {
    let mut seen = Vec::new();
    for p in iter {
        if !seen.contains(&p) {
            seen.push(p);
        }
    }
    seen
}

/// Where a stack frame descriptor came from.
///
/// Call-site frames and function-definition frames render identically but the
/// stack collector needs the distinction to suppress duplicates when both
/// stack policies are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrameKind {
    CallSite,
    FunDef,
}

/// One stack frame, rendered as `{module,function,arity,{line,L}}`.
///
/// For call-site frames the function is the one containing the call and the
/// line is the call site, mirroring how native stack traces report the
/// position a function is executing at.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Frame {
    pub module: String,
    pub name: String,
    pub arity: u32,
    pub line: u32,
    pub kind: FrameKind,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{},{},{{line,{}}}}}", self.module, self.name, self.arity, self.line)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poi_renders_as_paper_tuple() {
        let p = Poi::new("merge.mf", 16, PoiKind::Call);
        assert_eq!(p.to_string(), "{'merge.mf',16,call,1}");
        let p = Poi::new("merge_ok.mf", 22, PoiKind::Case);
        assert_eq!(p.to_string(), "{'merge_ok.mf',22,'case',1}");
        let p = Poi::new("m.mf", 5, PoiKind::Var("A".into())).with_occurrence(2);
        assert_eq!(p.to_string(), "{'m.mf',5,{var,'A'},2}");
    }

    #[test]
    fn frame_renders_with_line_tuple() {
        let f = Frame {
            module: "merge_ok".into(),
            name: "mergesort".into(),
            arity: 2,
            line: 16,
            kind: FrameKind::CallSite,
        };
        assert_eq!(f.to_string(), "{merge_ok,mergesort,2,{line,16}}");
    }

    #[test]
    fn relation_sides_deduplicate() {
        let a = Poi::new("a.mf", 1, PoiKind::Call);
        let b = Poi::new("b.mf", 1, PoiKind::Call);
        let c = Poi::new("b.mf", 2, PoiKind::Call);
        let rel = PoiRelation::new(vec![(a.clone(), b.clone()), (a.clone(), c.clone())]);
        assert_eq!(rel.old_pois(), vec![a.clone()]);
        assert_eq!(rel.new_pois(), vec![b.clone(), c.clone()]);
        assert!(rel.related(&a, &b));
        assert!(!rel.related(&b, &a));
    }
}
