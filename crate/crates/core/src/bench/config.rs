//! `key = value` run configuration with a `[case]` section.
//!
//! ```toml
//! [case]
//! id = "pentagon"
//! epsilon = 1e-6
//! theta = 0.9
//! ```
//!
//! Only `id` is required; every other key overrides the case default.

use serde::Deserialize;

use super::cases::{Case, CaseId};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    case: Section,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Section {
    id: String,
    degree: Option<usize>,
    theta: Option<f64>,
    epsilon: Option<f64>,
    mode: Option<String>,
    mu: Option<usize>,
    basis: Option<String>,
    max_dof: Option<usize>,
    max_levels: Option<usize>,
    max_iterations: Option<usize>,
    grading: Option<usize>,
}

/// Parse a configuration and resolve it against the case defaults.
pub fn parse_config(text: &str) -> Result<Case> {
    let file: File = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    let s = file.case;
    let id: CaseId = s
        .id
        .parse()
        .map_err(|_| Error::Config(format!("key `id`: unknown case `{}`", s.id)))?;
    let mut case = Case::new(id);
    if let Some(p) = s.degree {
        case.degree = p;
        // the admissibility class follows the degree unless given
        case.mu = p;
    }
    if let Some(v) = s.theta {
        case.theta = v;
    }
    if let Some(v) = s.epsilon {
        case.epsilon = v;
    }
    if let Some(v) = s.mode {
        case.mode = v.parse().map_err(|e| Error::Config(format!("key `mode`: {e}")))?;
    }
    if let Some(v) = s.mu {
        case.mu = v;
    }
    if let Some(v) = s.basis {
        case.basis = v.parse().map_err(|e| Error::Config(format!("key `basis`: {e}")))?;
    }
    if let Some(v) = s.max_dof {
        case.max_dof = v;
    }
    if let Some(v) = s.max_levels {
        case.max_levels = v;
    }
    if let Some(v) = s.max_iterations {
        case.max_iterations = v;
    }
    if let Some(v) = s.grading {
        case.grading = v;
    }
    case.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(case)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapt::Mode;

    #[test]
    fn defaults_and_overrides() {
        let c = parse_config("[case]\nid = \"pentagon\"\n").unwrap();
        assert_eq!(c, Case::new(CaseId::Pentagon));
        let c = parse_config(
            "[case]\nid = \"lshape\"\nepsilon = 1e-7\ntheta = 0.5\nmode = \"uniform\"\n",
        )
        .unwrap();
        assert_eq!(c.epsilon, 1e-7);
        assert_eq!(c.theta, 0.5);
        assert_eq!(c.mode, Mode::Uniform);
        assert_eq!(c.max_levels, 12);
    }

    #[test]
    fn floats_round_trip_exactly() {
        let eps: f64 = 1.2345678901234567e-6;
        let c = parse_config(&format!("[case]\nid = \"pentagon\"\nepsilon = {eps:e}\n")).unwrap();
        assert_eq!(c.epsilon.to_bits(), eps.to_bits());
    }

    #[test]
    fn errors_name_the_key() {
        let msg = parse_config("[case]\nid = \"pentagon\"\ntheat = 0.9\n").unwrap_err().to_string();
        assert!(msg.contains("theat"), "{msg}");
        let msg = parse_config("[case]\nid = \"hexagon\"\n").unwrap_err().to_string();
        assert!(msg.contains("id"), "{msg}");
        let msg = parse_config("[case]\nid = \"pentagon\"\nmode = \"fast\"\n").unwrap_err().to_string();
        assert!(msg.contains("mode"), "{msg}");
        let msg = parse_config("[case]\nid = \"pentagon\"\ndegree = 1\n").unwrap_err().to_string();
        assert!(msg.contains("degree"), "{msg}");
        assert!(parse_config("[run]\nid = \"pentagon\"\n").is_err());
        assert!(parse_config("[case]\nid = \"pentagon\"\ntheta = \"high\"\n").is_err());
    }
}
