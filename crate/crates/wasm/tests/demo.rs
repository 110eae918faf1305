use approx::assert_relative_eq;
use chebyshev_wasm::{bound_curve, operator_norm_demo, quantize_demo};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

const SIGNED_BASIS: &str = r#"{"dim":3,"p":2,"role":"primal","atoms":[[1,0,0],[-1,0,0],[0,1,0],[0,-1,0],[0,0,1],[0,0,-1]],"weights":[0.16666666666666666,0.16666666666666666,0.16666666666666666,0.16666666666666666,0.16666666666666666,0.16666666666666669]}"#;

#[test]
fn curves_for_signed_basis() {
    let v = parse(bound_curve(SIGNED_BASIS, "all", 0.01, 100.0, 9));
    assert!(v.get("error").is_none(), "{v}");
    assert_eq!(v["epsilon"].as_array().unwrap().len(), 9);
    let curves = v["curves"].as_array().unwrap();
    // scalar needs one dimension
    assert_eq!(curves.len(), 7);
    assert_eq!(v["skipped"][0]["inequality"], "scalar");
    for c in curves {
        for r in c["reports"].as_array().unwrap() {
            assert_eq!(r["holds"], true, "{c}");
        }
    }
    let chen = curves.iter().find(|c| c["inequality"] == "chen").unwrap();
    // ε = 1 sits in the middle of the grid; every atom has (S⁻¹x, x) = 3
    let mid = &chen["reports"][4];
    assert_relative_eq!(mid["epsilon"].as_f64().unwrap(), 1.0, max_relative = 1e-15);
    assert_relative_eq!(mid["lhs"].as_f64().unwrap(), 1.0, max_relative = 1e-15);
    assert_relative_eq!(mid["rhs"].as_f64().unwrap(), 3.0, max_relative = 1e-12);
}

#[test]
fn quantization_guarantees() {
    for p in ["1", "2", "inf"] {
        let v = parse(quantize_demo("gaussian", p, 0.2, 500, 1));
        assert!(v.get("error").is_none(), "{v}");
        assert_eq!(v["shrink"], true);
        assert!(v["max_error"].as_f64().unwrap() <= v["error_bound"].as_f64().unwrap());
        assert_eq!(v["raw"].as_array().unwrap().len(), 500);
        assert!(v["cells"].as_u64().unwrap() <= 500);
    }
    let v = parse(quantize_demo("uniform-ball", "1.5", 0.05, 100, 3));
    assert!(v.get("error").is_none(), "{v}");
    assert!(parse(quantize_demo("cauchy", "2", 0.1, 10, 0))["error"].is_string());
    assert!(parse(quantize_demo("gaussian", "2", 0.1, 0, 0))["error"].is_string());
}

#[test]
fn operator_norm_bracket() {
    let v = parse(operator_norm_demo(2.0, 0.0, 0.0, 3.0, "2", "2"));
    assert_eq!(v["exact"], true);
    assert_relative_eq!(v["upper"].as_f64().unwrap(), 3.0, max_relative = 1e-14);

    let v = parse(operator_norm_demo(1.0, 1.0, 0.0, 1.0, "4", "3"));
    let (lower, upper) = (v["lower"].as_f64().unwrap(), v["upper"].as_f64().unwrap());
    let outline = v["outline_max"].as_f64().unwrap();
    assert!(lower <= upper && outline <= upper * (1.0 + 1e-12));
    assert_eq!(
        v["image"].as_array().unwrap().len(),
        v["domain"].as_array().unwrap().len()
    );
    assert!(parse(operator_norm_demo(1.0, 0.0, 0.0, 1.0, "0.3", "2"))["error"].is_string());
}
