//! Scenario files shipped with the repository, embedded at build time.

pub struct Example {
    pub name: &'static str,
    pub path: &'static str,
    pub text: &'static str,
}

macro_rules! example {
    ($name:literal) => {
        Example {
            name: $name,
            path: concat!("scenarios/", $name, ".toml"),
            text: include_str!(concat!("../../../scenarios/", $name, ".toml")),
        }
    };
}

pub const EXAMPLES: &[Example] = &[
    example!("annotated"),
    example!("zero_verify"),
    example!("drift_verify"),
    example!("mixed_verify"),
    example!("recombining_verify"),
    example!("bsde_axioms"),
    example!("reflected"),
    example!("constrained_negz"),
    example!("constrained_none"),
    example!("constrained_unstabilized"),
    example!("continuity"),
];

impl Example {
    pub fn find(name: &str) -> Option<&'static Example> {
        EXAMPLES.iter().find(|e| e.name == name)
    }

    /// First comment line of the file.
    pub fn summary(&self) -> &'static str {
        self.text
            .lines()
            .find_map(|l| l.strip_prefix("# "))
            .unwrap_or("")
    }
}
