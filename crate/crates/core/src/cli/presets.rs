//! Named example configurations.

use super::config::{parse_config, ConfigError, RunConfig};

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub toml: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "chain6",
        summary: "undirected chain of 6, PRFs A B C D A B",
        toml: r#"name = "chain6"
omega = "2pi"
periods = 200
prfs = ["A", "B", "C", "D", "A", "B"]

[topology]
kind = "undirected-chain"
coupling = [0.4, 0.5, 0.6, 0.6, 0.5, 0.4]

[initial]
seed = 42

[batch]
count = 100
base_seed = 0
"#,
    },
    Preset {
        name: "directed-chain6",
        summary: "directed chain 1 -> 2 -> ... -> 6, PRFs A B C D A B",
        toml: r#"name = "directed-chain6"
omega = "2pi"
periods = 200
prfs = ["A", "B", "C", "D", "A", "B"]

[topology]
kind = "directed-chain"
coupling = [0.4, 0.5, 0.6, 0.6, 0.5, 0.4]

[initial]
seed = 42

[batch]
count = 100
base_seed = 0
"#,
    },
    Preset {
        name: "tree10",
        summary: "directed tree of 10 rooted at node 1 (four chains)",
        toml: r#"name = "tree10"
omega = "2pi"
periods = 200
prfs = ["A", "B", "C", "D", "A", "B", "C", "D", "A", "B"]

[topology]
kind = "directed-tree"
coupling = [0.6, 0.5, 0.4, 0.6, 0.5, 0.4, 0.6, 0.5, 0.4, 0.6]
parents = [0, 1, 1, 2, 2, 3, 4, 4, 6, 7]

[initial]
seed = 42

[batch]
count = 100
base_seed = 0
"#,
    },
    Preset {
        name: "chain6-perturbed",
        summary: "chain6 with p_k(t) = 0.5 sin(2 pi t + 2 pi k / 6), dense recording",
        toml: r#"name = "chain6-perturbed"
omega = "2pi"
periods = 50
prfs = ["A", "B", "C", "D", "A", "B"]

[topology]
kind = "undirected-chain"
coupling = [0.4, 0.5, 0.6, 0.6, 0.5, 0.4]

[initial]
seed = 42

[record]
dense = 0.01

[perturbation]
kind = "sinusoid-family"
amplitude = 0.5

[batch]
count = 20
base_seed = 0
"#,
    },
];

pub fn find_preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn load_preset(name: &str) -> Result<RunConfig, ConfigError> {
    let preset = find_preset(name).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        ConfigError::Invalid(vec![super::config::FieldIssue {
            path: "preset".into(),
            message: format!("unknown preset {name:?}; known: {}", known.join(", ")),
        }])
    })?;
    parse_config(preset.toml)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::TopologyKind;

    #[test]
    fn all_presets_parse() {
        for p in PRESETS {
            let cfg = load_preset(p.name).unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert_eq!(cfg.name, p.name);
            let periods = if p.name == "chain6-perturbed" { 50.0 } else { 200.0 };
            assert!((cfg.params.t_end - periods).abs() < 1e-12);
        }
    }

    #[test]
    fn tree10_shape() {
        let cfg = load_preset("tree10").unwrap();
        let topo = cfg.network.topology();
        assert_eq!(topo.kind(), TopologyKind::DirectedTree);
        assert_eq!(topo.decompose_tree().unwrap().len(), 4);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(load_preset("ring"), Err(ConfigError::Invalid(_))));
    }
}
