//! Pre-made checks and actions offered to tree authors for each domain.

use serde::Serialize;

use prolonet::Domain;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOption {
    pub feature: String,
    pub op: &'static str,
    pub value: f64,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainVocabulary {
    pub name: &'static str,
    pub features: Vec<String>,
    pub actions: Vec<String>,
    pub checks: Vec<CheckOption>,
}

fn check(feature: &str, op: &'static str, value: f64, label: String) -> CheckOption {
    CheckOption {
        feature: feature.into(),
        op,
        value,
        label,
    }
}

fn cartpole_checks() -> Vec<CheckOption> {
    let mut out = Vec::new();
    for (feature, above, below) in [
        (
            "x_position",
            "The cart is right of centre",
            "The cart is left of centre",
        ),
        (
            "x_velocity",
            "The cart is moving right",
            "The cart is moving left",
        ),
        ("pole_angle", "The pole leans right", "The pole leans left"),
        (
            "pole_velocity",
            "The pole is falling right",
            "The pole is falling left",
        ),
    ] {
        out.push(check(feature, ">", 0.0, above.into()));
        out.push(check(feature, "<", 0.0, below.into()));
    }
    out
}

fn wildfire_checks() -> Vec<CheckOption> {
    let mut out = Vec::new();
    for fire in 1..=2 {
        // offsets are positive when the fire lies north or west of the drone
        out.push(check(
            &format!("fire{fire}_north"),
            ">",
            0.0,
            format!("Fire {fire} is to my north"),
        ));
        out.push(check(
            &format!("fire{fire}_north"),
            "<",
            0.0,
            format!("Fire {fire} is to my south"),
        ));
        out.push(check(
            &format!("fire{fire}_west"),
            ">",
            0.0,
            format!("Fire {fire} is to my west"),
        ));
        out.push(check(
            &format!("fire{fire}_west"),
            "<",
            0.0,
            format!("Fire {fire} is to my east"),
        ));
    }
    for fire in 1..=2 {
        let feature = format!("closest_to_fire{fire}");
        out.push(check(
            &feature,
            ">",
            0.5,
            format!("I am the closest drone to Fire {fire}"),
        ));
        out.push(check(
            &feature,
            "<",
            0.5,
            format!("I am not the closest drone to Fire {fire}"),
        ));
    }
    out
}

pub fn vocabulary(domain: Domain) -> DomainVocabulary {
    DomainVocabulary {
        name: domain.name(),
        features: domain.feature_names(),
        actions: domain.action_names(),
        checks: match domain {
            Domain::Cartpole => cartpole_checks(),
            Domain::Wildfire => wildfire_checks(),
        },
    }
}
