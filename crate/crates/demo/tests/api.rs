use smmfit_demo::{compare_partitions, fit_text, simulate_and_fit};

fn parse(s: &str) -> serde_json::Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn simulate_and_fit_is_deterministic() {
    let a = simulate_and_fit(1, 2, 4000, 9, "l2", 3, 100.0);
    let b = simulate_and_fit(1, 2, 4000, 9, "l2", 3, 100.0);
    assert_eq!(a, b);
    let v = parse(&a);
    let path = v["path"].as_array().unwrap();
    assert_eq!(path[0]["lambda"].as_f64().unwrap(), 0.0);
    assert_eq!(path[v["selected"].as_u64().unwrap() as usize]["k"], v["k"]);
}

#[test]
fn setup2_uses_64_contexts() {
    let v = parse(&simulate_and_fit(2, 3, 3000, 0, "linf", 15, 10.0));
    assert!(v.get("error").is_none(), "{v}");
    assert!(v["contexts"].as_array().unwrap().len() <= 64);
    assert_eq!(v["contexts"][0].as_str().unwrap().len(), 3);
}

#[test]
fn identical_partitions_score_one() {
    let v = parse(&compare_partitions("x y y z", "1,2,2,3"));
    assert_eq!(v["ri"].as_f64().unwrap(), 1.0);
    assert_eq!(v["ari"].as_f64().unwrap(), 1.0);
}

#[test]
fn bad_alphabet_is_reported() {
    let v = parse(&fit_text("ACGT", "", 1, "uniform", 3, 1.0));
    assert!(v["error"].is_string());
}
