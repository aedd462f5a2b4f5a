use proptest::prelude::*;
use serde_json::json;

use csflock::config::{ConfigError, SimConfig};

fn arb_document() -> impl Strategy<Value = serde_json::Value> {
    (
        0.01f64..0.99,
        1usize..6,
        1usize..4,
        0.1f64..20.0,
        any::<u64>(),
        prop::bool::ANY,
        prop::option::of(1e-12f64..1e-3),
    )
        .prop_map(|(alpha, n, dim, t_final, seed, unnormalized, rel_tol)| {
            let mut doc = json!({
                "kernel": {"kind": "singular", "alpha": alpha},
                "n": n, "dim": dim, "t_final": t_final, "seed": seed,
                "initial": {"random": {"half_width": 2.0}},
            });
            if unnormalized {
                doc["normalization"] = json!("unnormalized");
            }
            if let Some(tol) = rel_tol {
                doc["step_control"] = json!({"rel_tol": tol});
            }
            doc
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parse_of_serialized_config_is_identity(doc in arb_document()) {
        let cfg = SimConfig::from_value(doc).unwrap();
        let again = SimConfig::from_json_str(&cfg.to_json_string()).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.to_json_string(), cfg.to_json_string());
    }
}

#[test]
fn cucker_smale_config_round_trips() {
    let cfg = SimConfig::from_json_str(
        r#"{"kernel": {"kind": "cucker-smale", "K": 2.0, "beta": 0.75},
            "n": 3, "dim": 2, "t_final": 1.5,
            "initial": {"positions": [[0, 0], [1, 0], [0, 1]],
                        "velocities": [[0.1, 0], [0, 0.2], [-0.3, 0]]}}"#,
    )
    .unwrap();
    assert_eq!(SimConfig::from_value(cfg.to_value()).unwrap(), cfg);
}

#[test]
fn schema_errors_name_the_key() {
    let bad = r#"{"kernel": {"kind": "singular", "alpha": 0.3}, "n": 2, "dim": 1,
                  "t_final": 1, "initial": {"scenario": "critical-pair"}, "colour": 3}"#;
    let err = SimConfig::from_json_str(bad).unwrap_err();
    assert!(matches!(err, ConfigError::Schema { .. }), "{err}");
    assert!(err.to_string().contains("colour"), "{err}");
}

#[test]
fn shipped_schema_lists_every_key() {
    let text = include_str!("../../../docs/config.schema.json");
    let schema: serde_json::Value = serde_json::from_str(text).unwrap();
    let cfg = SimConfig::from_json_str(
        r#"{"kernel": {"kind": "singular", "alpha": 0.5}, "n": 2, "dim": 1,
            "t_final": 1.0, "initial": {"scenario": "critical-pair"}}"#,
    )
    .unwrap();
    let doc = cfg.to_value();
    let props = &schema["properties"];
    for (key, value) in doc.as_object().unwrap() {
        assert!(props.get(key).is_some(), "schema lacks `{key}`");
        if let (Some(inner), Some(sub)) = (value.as_object(), props[key]["properties"].as_object()) {
            for k in inner.keys() {
                assert!(sub.contains_key(k), "schema lacks `{key}.{k}`");
            }
        }
    }
}
