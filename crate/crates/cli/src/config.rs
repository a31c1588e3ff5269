//! INI experiment configs: `[section]` headers with `key = value` lines.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use dplab_core::coefficient::{builtin, Coefficient};
use dplab_core::ExponentParams;
use ini::Ini;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Solve,
    Compare,
    Barrier,
    Modulus,
    Steklov,
    Infconv,
    Caccioppoli,
    Counterexample,
    PsiScan,
    VectorIneq,
    ClassS,
}

impl Kind {
    pub const ALL: [Kind; 11] = [
        Kind::Solve,
        Kind::Compare,
        Kind::Barrier,
        Kind::Modulus,
        Kind::Steklov,
        Kind::Infconv,
        Kind::Caccioppoli,
        Kind::Counterexample,
        Kind::PsiScan,
        Kind::VectorIneq,
        Kind::ClassS,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Solve => "solve",
            Kind::Compare => "compare",
            Kind::Barrier => "barrier",
            Kind::Modulus => "modulus",
            Kind::Steklov => "steklov",
            Kind::Infconv => "infconv",
            Kind::Caccioppoli => "caccioppoli",
            Kind::Counterexample => "counterexample",
            Kind::PsiScan => "psi_scan",
            Kind::VectorIneq => "vector_ineq",
            Kind::ClassS => "class_s",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Kind::Solve => "implicit solve with optional heat-kernel error and mesh-order checks",
            Kind::Compare => "seeded random problems, strict sub/super pairs, comparison check",
            Kind::Barrier => "barrier Theta search, residual certificate, optional K-scaling check",
            Kind::Modulus => "space Lipschitz and time Holder estimates of solved fields",
            Kind::Steklov => "Steklov and mollifier W^H-modular convergence on a smooth field",
            Kind::Infconv => "inf-convolution ordering, argmin radius, semiconcavity, 1D closed form",
            Kind::Caccioppoli => "energy-bound ratio on solved fields under mesh refinement",
            Kind::Counterexample => "divergence of the a-weighted Steklov modular on refinement",
            Kind::PsiScan => "doubling-function threshold L* and its amplitude monotonicity",
            Kind::VectorIneq => "random-pair checks of the three vector power-map inequalities",
            Kind::ClassS => "discrete semi-jet inequalities on solved fields",
        }
    }

    /// Keys that must be present, as `section.key`.
    pub fn required_keys(self) -> &'static [&'static str] {
        match self {
            Kind::VectorIneq => &["vector_ineq.samples"],
            Kind::Compare => &["compare.count"],
            Kind::Barrier => &["barrier.p_values", "barrier.q_offsets"],
            _ => &["params.p", "params.q"],
        }
    }

    /// Sections read by this kind besides `[experiment]`.
    fn sections(self) -> &'static [&'static str] {
        const FIELD: &[&str] = &["params", "coefficient", "grid", "data", "sweep", "check"];
        match self {
            Kind::Solve => &["params", "coefficient", "grid", "domain", "data", "check"],
            Kind::Compare => &["compare", "grid", "check"],
            Kind::Barrier => &["barrier", "coefficient", "check"],
            Kind::Steklov => &["params", "coefficient", "steklov", "check"],
            Kind::Infconv => &["params", "coefficient", "infconv", "check"],
            Kind::Counterexample => &["params", "counterexample", "check"],
            Kind::VectorIneq => &["vector_ineq", "check"],
            Kind::Caccioppoli => &["params", "coefficient", "grid", "data", "sweep", "caccioppoli", "check"],
            Kind::PsiScan => &["params", "coefficient", "grid", "data", "sweep", "psi", "check"],
            Kind::Modulus | Kind::ClassS => FIELD,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::Parse(format!("unknown experiment kind '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub name: String,
    pub seed: u64,
    ini: Ini,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Parse(format!("malformed config: {e}")))?;
        let kind_str = ini.get_from(Some("experiment"), "kind");
        let Some(kind_str) = kind_str else {
            return Err(CliError::Parse(format!(
                "missing keys: experiment.kind (one of {})",
                Kind::ALL.map(Kind::name).join(", ")
            )));
        };
        let kind: Kind = kind_str.trim().parse()?;
        let name = ini
            .get_from(Some("experiment"), "name")
            .unwrap_or(kind.name())
            .trim()
            .to_string();
        let mut cfg = Self {
            kind,
            name,
            seed: 0,
            ini,
        };
        cfg.seed = cfg.get_or("experiment", "seed", 0u64)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let missing: Vec<&str> = self
            .kind
            .required_keys()
            .iter()
            .copied()
            .filter(|k| {
                let (s, key) = k.split_once('.').expect("section.key");
                self.raw(s, key).is_none()
            })
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Parse(format!("missing keys: {}", missing.join(", "))));
        }
        let allowed: BTreeSet<&str> = self.kind.sections().iter().copied().chain(["experiment"]).collect();
        for (sec, _) in self.ini.iter() {
            if let Some(sec) = sec {
                if !allowed.contains(sec) {
                    return Err(CliError::Parse(format!(
                        "section [{sec}] is not used by kind '{}'",
                        self.kind
                    )));
                }
            }
        }
        if self.raw("params", "p").is_some() {
            self.params()?;
        }
        if self.raw("coefficient", "name").is_some() {
            self.coefficient()?;
        }
        for (sec, key) in [("grid", "cells"), ("grid", "steps")] {
            if let Some(list) = self.opt_list::<usize>(sec, key)? {
                if list.is_empty() || list.contains(&0) {
                    return Err(CliError::Parse(format!(
                        "{sec}.{key} must be a nonempty list of positive integers"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.ini.get_from(Some(section), key).map(str::trim)
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<T, CliError> {
        let raw = self
            .raw(section, key)
            .ok_or_else(|| CliError::Parse(format!("missing keys: {section}.{key}")))?;
        parse_value(section, key, raw)
    }

    pub fn get_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T, CliError> {
        match self.raw(section, key) {
            Some(raw) => parse_value(section, key, raw),
            None => Ok(default),
        }
    }

    pub fn opt_list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>, CliError> {
        self.raw(section, key)
            .map(|raw| {
                raw.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_value(section, key, s))
                    .collect()
            })
            .transpose()
    }

    pub fn list_or<T: FromStr>(&self, section: &str, key: &str, default: Vec<T>) -> Result<Vec<T>, CliError> {
        let v = self.opt_list(section, key)?.unwrap_or(default);
        if v.is_empty() {
            return Err(CliError::Parse(format!("{section}.{key} must not be empty")));
        }
        Ok(v)
    }

    pub fn params(&self) -> Result<ExponentParams, CliError> {
        let p: f64 = self.get("params", "p")?;
        let q: f64 = self.get("params", "q")?;
        self.params_for(p, q)
    }

    /// Exponents with the `[params]` growth block and the given `p`, `q`.
    pub fn params_for(&self, p: f64, q: f64) -> Result<ExponentParams, CliError> {
        let beta1 = self.get_or("params", "beta1", 1.0)?;
        let beta2 = self.get_or("params", "beta2", 1.0)?;
        let c_f = self.get_or("params", "c_f", 0.0)?;
        let borderline = self.get_or("params", "borderline_ok", false)?;
        ExponentParams::new(p, q, beta1, beta2, c_f)
            .map(|e| e.with_borderline(borderline))
            .map_err(|e| CliError::Parse(e.to_string()))
    }

    /// `(p, q)` pairs from `sweep.pairs = p:q, p:q` or the single `[params]` pair.
    pub fn pairs(&self) -> Result<Vec<(f64, f64)>, CliError> {
        let Some(raw) = self.raw("sweep", "pairs") else {
            return Ok(vec![(self.get("params", "p")?, self.get("params", "q")?)]);
        };
        let pairs: Vec<(f64, f64)> = raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                let (p, q) = s
                    .split_once(':')
                    .ok_or_else(|| CliError::Parse(format!("sweep.pairs entry '{s}' is not p:q")))?;
                Ok((parse_value("sweep", "pairs", p)?, parse_value("sweep", "pairs", q)?))
            })
            .collect::<Result<_, CliError>>()?;
        if pairs.is_empty() {
            return Err(CliError::Parse("sweep.pairs must not be empty".into()));
        }
        for &(p, q) in &pairs {
            self.params_for(p, q)?;
        }
        Ok(pairs)
    }

    pub fn coefficient(&self) -> Result<Coefficient, CliError> {
        let name = self.raw("coefficient", "name").unwrap_or("constant");
        let mut args = Vec::new();
        if let Some(props) = self.ini.section(Some("coefficient")) {
            for (k, v) in props.iter() {
                if k != "name" {
                    args.push((k.to_string(), parse_value::<f64>("coefficient", k, v.trim())?));
                }
            }
        }
        let borrowed: Vec<(&str, f64)> = args.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        builtin(name, &borrowed).map_err(|e| CliError::Parse(e.to_string()))
    }
}

fn parse_value<T: FromStr>(section: &str, key: &str, raw: &str) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| CliError::Parse(format!("{section}.{key}: cannot parse '{raw}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_lists_missing_keys() {
        let err = ExperimentConfig::parse("").unwrap_err();
        assert!(err.to_string().contains("experiment.kind"));
        let err = ExperimentConfig::parse("[experiment]\nkind = solve\n").unwrap_err();
        assert!(err.to_string().contains("params.p, params.q"), "{err}");
    }

    #[test]
    fn unknown_kind_is_named() {
        let err = ExperimentConfig::parse("[experiment]\nkind = teleport\n").unwrap_err();
        assert!(err.to_string().contains("teleport"));
    }

    #[test]
    fn q_below_p_names_the_constraint() {
        let err = ExperimentConfig::parse("[experiment]\nkind = solve\n[params]\np = 3\nq = 2\n").unwrap_err();
        assert!(err.to_string().contains("q"), "{err}");
    }

    #[test]
    fn lists_and_pairs() {
        let cfg = ExperimentConfig::parse(
            "[experiment]\nkind = modulus\n[params]\np = 2\nq = 2.5\n[sweep]\npairs = 1.5:2, 3:3.5\n[grid]\ncells = 8, 16\n",
        )
        .unwrap();
        assert_eq!(cfg.pairs().unwrap(), vec![(1.5, 2.0), (3.0, 3.5)]);
        assert_eq!(cfg.list_or::<usize>("grid", "cells", vec![]).unwrap(), vec![8, 16]);
    }

    #[test]
    fn stray_sections_are_rejected() {
        let err = ExperimentConfig::parse(
            "[experiment]\nkind = vector_ineq\n[vector_ineq]\nsamples = 10\n[grid]\ncells = 4\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("[grid]"));
    }

    #[test]
    fn coefficient_arguments_pass_through() {
        let cfg = ExperimentConfig::parse(
            "[experiment]\nkind = solve\n[params]\np = 2\nq = 2\n[coefficient]\nname = smooth_bump\namp = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.coefficient().unwrap().name(), "smooth_bump");
    }
}
