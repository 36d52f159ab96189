//! Declarative configuration files.
//!
//! A config file is a sequence of named definitions, one per line group,
//! terminated by `.`:
//!
//! ```text
//! poi1_old = {'merge_ok.mf', 16, call, 1}.
//! poi1_new = {'merge.mf', 16, call, 1}.
//! rel1 = [{poi1_old, poi1_new}].
//! funs = [mergesortcomp/1].
//! config1 = nuai_r([{different_value, [val, st]}]).
//! ```
//!
//! POI literals follow the report syntax `{module, line, kind[, occ]}`;
//! relations list pairs of POI names or literals; input-function lists use
//! `name/arity`; mode blocks are `nuai`, `nuai_t(TECF)`, `nuai_r(UBRM)`,
//! `nuai_tr(TECF, UBRM)`, `uai` or `ait`, with TECF naming a preset and UBRM
//! a `[{type, [fields]}]` list.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::compare::{build_mode_config, tecf_lookup, CompareError, ComparisonConfig, Mode, UbField};
use crate::poi::{Poi, PoiKind, PoiRelation};
use crate::syntax::token::{tokenize, Tok, Token};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("{file}:{line}:{column}: {message}")]
    Parse { file: String, line: u32, column: u32, message: String },
    #[error("{file}: dangling reference to {name}")]
    DanglingName { file: String, name: String },
    #[error("{file}: duplicate definition of {name}")]
    DuplicateName { file: String, name: String },
    #[error("{file}: no relations defined")]
    NoRelations { file: String },
    #[error("{file}: {source}")]
    Compare { file: String, source: CompareError },
}

/// Parsed configuration file contents.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    pub pois: BTreeMap<String, Poi>,
    pub relations: BTreeMap<String, PoiRelation>,
    pub funs: BTreeMap<String, Vec<(String, usize)>>,
    pub modes: BTreeMap<String, ComparisonConfig>,
}

pub fn load_config(path: &Path) -> Result<ConfigFile, ConfigError> {
    let file = path.display().to_string();
    let source =
        std::fs::read_to_string(path).map_err(|e| ConfigError::Io(file.clone(), e))?;
    parse_config(&source, &file)
}

pub fn parse_config(source: &str, file: &str) -> Result<ConfigFile, ConfigError> {
    let tokens = tokenize(source).map_err(|e| ConfigError::Parse {
        file: file.into(),
        line: e.line,
        column: e.column,
        message: e.message,
    })?;
    let mut p = Cfg { tokens, pos: 0, file: file.to_string() };
    let mut out = ConfigFile::default();
    while p.peek() != &Tok::Eof {
        p.definition(&mut out)?;
    }
    if out.relations.is_empty() {
        return Err(ConfigError::NoRelations { file: file.into() });
    }
    Ok(out)
}

/// Parse an inline input-function list, e.g. `[align_left/0]`.
pub fn parse_fun_list(text: &str) -> Result<Vec<(String, usize)>, ConfigError> {
    let tokens = tokenize(text).map_err(|e| ConfigError::Parse {
        file: "<inline>".into(),
        line: e.line,
        column: e.column,
        message: e.message,
    })?;
    let mut p = Cfg { tokens, pos: 0, file: "<inline>".into() };
    let funs = p.fun_list()?;
    p.expect(&Tok::Eof, "end of list")?;
    Ok(funs)
}

struct Cfg {
    tokens: Vec<Token>,
    pos: usize,
    file: String,
}

impl Cfg {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        let i = (self.pos + 1).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, ConfigError> {
        let t = &self.tokens[self.pos];
        Err(ConfigError::Parse {
            file: self.file.clone(),
            line: t.line,
            column: t.column,
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<(), ConfigError> {
        if self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("expected {}, found {}", what, self.peek()))
        }
    }

    fn atom(&mut self, what: &str) -> Result<String, ConfigError> {
        match self.peek().clone() {
            Tok::Atom(name) => {
                self.bump();
                Ok(name)
            }
            other => self.fail(format!("expected {}, found {}", what, other)),
        }
    }

    fn int(&mut self) -> Result<i64, ConfigError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(n)
            }
            other => self.fail(format!("expected integer, found {}", other)),
        }
    }

    fn definition(&mut self, out: &mut ConfigFile) -> Result<(), ConfigError> {
        let name = self.atom("definition name")?;
        self.expect(&Tok::Match_, "=")?;
        let taken = out.pois.contains_key(&name)
            || out.relations.contains_key(&name)
            || out.funs.contains_key(&name)
            || out.modes.contains_key(&name);
        if taken {
            return Err(ConfigError::DuplicateName { file: self.file.clone(), name });
        }
        match self.peek().clone() {
            Tok::LBrace => {
                let poi = self.poi_literal()?;
                out.pois.insert(name, poi);
            }
            Tok::LBracket => {
                if self.peek2() == &Tok::LBrace {
                    let rel = self.relation(out)?;
                    out.relations.insert(name, rel);
                } else {
                    let funs = self.fun_list()?;
                    out.funs.insert(name, funs);
                }
            }
            Tok::Atom(_) => {
                let cfg = self.mode_block()?;
                out.modes.insert(name, cfg);
            }
            other => return self.fail(format!("expected a definition body, found {}", other)),
        }
        self.expect(&Tok::Dot, ".")
    }

    fn poi_literal(&mut self) -> Result<Poi, ConfigError> {
        self.expect(&Tok::LBrace, "{")?;
        let module = self.atom("module name")?;
        self.expect(&Tok::Comma, ",")?;
        let line = self.int()? as u32;
        self.expect(&Tok::Comma, ",")?;
        let kind = self.poi_kind()?;
        let occurrence = if self.peek() == &Tok::Comma {
            self.bump();
            self.int()? as u32
        } else {
            1
        };
        self.expect(&Tok::RBrace, "}")?;
        Ok(Poi { module, line, kind, occurrence })
    }

    fn poi_kind(&mut self) -> Result<PoiKind, ConfigError> {
        match self.peek().clone() {
            Tok::Atom(name) => {
                self.bump();
                match PoiKind::from_atom(&name) {
                    Some(kind) => Ok(kind),
                    None => self.fail(format!("unknown POI kind {}", name)),
                }
            }
            Tok::Case => {
                self.bump();
                Ok(PoiKind::Case)
            }
            Tok::If => {
                self.bump();
                Ok(PoiKind::If)
            }
            Tok::Fun => {
                self.bump();
                Ok(PoiKind::Fun)
            }
            Tok::Try => {
                self.bump();
                Ok(PoiKind::Try)
            }
            Tok::LBrace => {
                self.bump();
                let tag = self.atom("var")?;
                if tag != "var" {
                    return self.fail("expected {var, Name}");
                }
                self.expect(&Tok::Comma, ",")?;
                let name = match self.peek().clone() {
                    Tok::Atom(a) => {
                        self.bump();
                        a
                    }
                    Tok::Var(v) => {
                        self.bump();
                        v
                    }
                    other => return self.fail(format!("expected variable name, found {}", other)),
                };
                self.expect(&Tok::RBrace, "}")?;
                Ok(PoiKind::Var(name))
            }
            other => self.fail(format!("expected POI kind, found {}", other)),
        }
    }

    fn relation(&mut self, out: &ConfigFile) -> Result<PoiRelation, ConfigError> {
        self.expect(&Tok::LBracket, "[")?;
        let mut pairs = Vec::new();
        loop {
            self.expect(&Tok::LBrace, "{")?;
            let old = self.poi_or_ref(out)?;
            self.expect(&Tok::Comma, ",")?;
            let new = self.poi_or_ref(out)?;
            self.expect(&Tok::RBrace, "}")?;
            pairs.push((old, new));
            if self.peek() == &Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(&Tok::RBracket, "]")?;
        Ok(PoiRelation::new(pairs))
    }

    fn poi_or_ref(&mut self, out: &ConfigFile) -> Result<Poi, ConfigError> {
        match self.peek().clone() {
            Tok::LBrace => self.poi_literal(),
            Tok::Atom(name) => {
                self.bump();
                out.pois.get(&name).cloned().ok_or_else(|| ConfigError::DanglingName {
                    file: self.file.clone(),
                    name,
                })
            }
            other => self.fail(format!("expected POI name or literal, found {}", other)),
        }
    }

    fn fun_list(&mut self) -> Result<Vec<(String, usize)>, ConfigError> {
        self.expect(&Tok::LBracket, "[")?;
        let mut out = Vec::new();
        if self.peek() == &Tok::RBracket {
            return self.fail("empty input-function list");
        }
        loop {
            let name = self.atom("function name")?;
            self.expect(&Tok::Slash, "/")?;
            let arity = self.int()? as usize;
            out.push((name, arity));
            if self.peek() == &Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(&Tok::RBracket, "]")?;
        Ok(out)
    }

    fn mode_block(&mut self) -> Result<ComparisonConfig, ConfigError> {
        let t = self.tokens[self.pos].clone();
        let name = self.atom("mode name")?;
        let mode = Mode::from_atom(&name).map_err(|e| ConfigError::Compare {
            file: self.file.clone(),
            source: e,
        })?;
        let _ = t;
        let (tecf, ubrm) = if self.peek() == &Tok::LParen {
            self.bump();
            let mut tecf = None;
            let mut ubrm = None;
            match mode {
                Mode::NuaiT => {
                    tecf = Some(self.tecf_name()?);
                }
                Mode::NuaiR => {
                    ubrm = Some(self.ubrm_list()?);
                }
                Mode::NuaiTr => {
                    tecf = Some(self.tecf_name()?);
                    self.expect(&Tok::Comma, ",")?;
                    ubrm = Some(self.ubrm_list()?);
                }
                Mode::Nuai | Mode::Uai | Mode::Ait => {
                    // These modes accept an optional UBRM override.
                    if self.peek() == &Tok::LBracket {
                        ubrm = Some(self.ubrm_list()?);
                    }
                }
            }
            self.expect(&Tok::RParen, ")")?;
            (tecf, ubrm)
        } else {
            (None, None)
        };
        let tecf = match tecf {
            Some(name) => Some(tecf_lookup(&name).map_err(|e| ConfigError::Compare {
                file: self.file.clone(),
                source: e,
            })?),
            None => None,
        };
        Ok(build_mode_config(mode, tecf, ubrm))
    }

    fn tecf_name(&mut self) -> Result<String, ConfigError> {
        self.atom("TECF preset name")
    }

    fn ubrm_list(&mut self) -> Result<Vec<(String, Vec<UbField>)>, ConfigError> {
        self.expect(&Tok::LBracket, "[")?;
        let mut out = Vec::new();
        loop {
            self.expect(&Tok::LBrace, "{")?;
            let ub_type = self.atom("UB type")?;
            self.expect(&Tok::Comma, ",")?;
            self.expect(&Tok::LBracket, "[")?;
            let mut fields = Vec::new();
            loop {
                let f = self.atom("report field")?;
                let f = UbField::from_atom(&f).map_err(|e| ConfigError::Compare {
                    file: self.file.clone(),
                    source: e,
                })?;
                fields.push(f);
                if self.peek() == &Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect(&Tok::RBracket, "]")?;
            self.expect(&Tok::RBrace, "}")?;
            out.push((ub_type, fields));
            if self.peek() == &Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(&Tok::RBracket, "]")?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compare::{Granularity, Tecf, Vef};

    #[test]
    fn loads_relation_funs_and_mode() {
        let src = "
p1 = {'a.mf', 4, call}.
p2 = {'b.mf', 4, call}.
rel1 = [{p1, p2}].
funs = [align_left/0].
cfg = nuai_tr(value_then_args, [{different_value_same_args, [val, ca]},
                                {different_value_different_args, [val, ca]}]).
";
        let c = parse_config(src, "t.cfg").unwrap();
        assert_eq!(c.relations["rel1"].pairs.len(), 1);
        assert_eq!(c.funs["funs"], vec![("align_left".to_string(), 0)]);
        let cfg = &c.modes["cfg"];
        assert!(matches!(cfg.tecf, Tecf::ValueThenArgs));
        assert_eq!(cfg.vef, Vef::ValueOnly);
        assert_eq!(cfg.granularity, Granularity::PerPoi);
        assert_eq!(cfg.ubrm.entries.len(), 2);
    }

    #[test]
    fn empty_file_has_no_relations() {
        let err = parse_config("", "t.cfg").unwrap_err();
        assert!(matches!(err, ConfigError::NoRelations { .. }));
    }

    #[test]
    fn dangling_reference_is_an_error() {
        let err = parse_config("rel = [{nope, nada}].", "t.cfg").unwrap_err();
        assert!(matches!(err, ConfigError::DanglingName { .. }));
    }

    #[test]
    fn bad_report_field_is_an_error() {
        let err = parse_config(
            "p = {'a.mf', 1, call}.\nrel = [{p, p}].\nc = nuai_r([{different_value, [foo]}]).",
            "t.cfg",
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::Compare { .. }));
    }

    #[test]
    fn inline_fun_lists_parse() {
        assert_eq!(parse_fun_list("[align_left/0]").unwrap(), vec![("align_left".into(), 0)]);
        assert!(parse_fun_list("[]").is_err());
    }

    #[test]
    fn poi_literals_support_occurrence_and_var_kinds() {
        let src = "p = {'m.mf', 5, {var, 'A'}, 2}.\nq = {'m.mf', 22, 'case'}.\nrel = [{p, q}].";
        let c = parse_config(src, "t.cfg").unwrap();
        assert_eq!(c.pois["p"].occurrence, 2);
        assert_eq!(c.pois["p"].kind, PoiKind::Var("A".into()));
        assert_eq!(c.pois["q"].kind, PoiKind::Case);
    }
}
