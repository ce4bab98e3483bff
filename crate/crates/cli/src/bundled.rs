//! Scenario files shipped with the binary.

pub struct Bundled {
    pub name: &'static str,
    pub summary: &'static str,
    pub json: &'static str,
}

macro_rules! bundled {
    ($name:literal, $summary:literal) => {
        Bundled { name: $name, summary: $summary, json: include_str!(concat!("../scenarios/", $name, ".json")) }
    };
}

pub const SCENARIOS: &[Bundled] = &[
    bundled!("upstream_ellipse", "ellipse u1² + 4u2² ≤ 1, s = (−x1/2, 0), (0,0) → (1,1)"),
    bundled!("downstream_ellipse", "ellipse u1² + 4u2² ≤ 1, s = (x1/2, 0), (0,0) → (1,1)"),
    bundled!("no_current_disk", "unit disk, no current, (0,0) → (1,0)"),
    bundled!("constant_current_disk", "disk of radius 2, s = (−1, 0), (0,0) → (0,4)"),
    bundled!("egg_start_line", "egg V = 1 + 0.3 cos θ, s = (−0.4, 0), segment start → (0,4)"),
    bundled!("isotropic_affine", "unit disk, s = x/5, (0,0) → (1,1)"),
];

pub fn find(name: &str) -> Option<&'static Bundled> {
    SCENARIOS.iter().find(|b| b.name == name)
}
