mod common;
use common::*;

#[test]
fn canon_debug() {
    let config_json = serde_json::json!({
        "schema": 1,
        "seed": 99,
        "estimand": { "stratum": "s1=1", "contrast": { "type": "risk_difference" } },
        "assumptions": { "monotonicity": null, "principal_ignorability_covariates": ["x1", "x2"], "exclusion_restriction": false },
        "methods": ["itt", "naive", "bounds", "pi_weighting", "pi_standardization"],
        "bootstrap": { "replicates": 150 },
        "sensitivity": { "tipping": { "beta_grid": { "min": -1.0, "max": 1.0, "points": 11 } } },
        "simulation": serde_json::to_value(pi_binary_config(400, 0, 0.0)).unwrap()
    });
    let config: stratumlab::cli::AnalysisConfig =
        serde_json::from_value(config_json).unwrap();
    let report = stratumlab::cli::run(&config, None).unwrap();
    let raw = report.to_canonical_json().unwrap();
    let value: serde_json::Value = serde_json::from_str(&raw).unwrap();
    let mut re = serde_json::to_string_pretty(&value).unwrap();
    re.push('\n');
    if raw != re {
        for (i, (a, b)) in raw.bytes().zip(re.bytes()).enumerate() {
            if a != b {
                println!("first diff at byte {i}");
                println!("raw: {}", &raw[i.saturating_sub(120)..(i + 80).min(raw.len())]);
                println!("re : {}", &re[i.saturating_sub(120)..(i + 80).min(re.len())]);
                break;
            }
        }
        panic!("not canonical: lens {} vs {}", raw.len(), re.len());
    }
    println!("canonical ok");
}
