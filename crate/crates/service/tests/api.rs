use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use prolonet::compile::{compile_tree, random_tree_spec, TreeSpecDoc};
use prolonet::envs::{Fire, WildfireState};
use prolonet::run::run_seed;
use prolonet::{Domain, RunConfig};
use prolonet_service::{router, ServiceConfig};

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(match body {
            Some(v) => Body::from(v.to_string()),
            None => Body::empty(),
        })
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes)
            .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

fn one_check_tree() -> Value {
    json!({
        "format": "treespec-v1",
        "domain": "cartpole",
        "root": {"check": {
            "terms": [{"feature": "x_position", "weight": 1.0}],
            "op": ">", "value": 0.0,
            "then": {"action": "left"}, "else": {"action": "right"}
        }}
    })
}

fn errors(body: &Value) -> Vec<String> {
    body["errors"]
        .as_array()
        .map(|a| {
            a.iter()
                .map(|e| e.as_str().unwrap_or_default().to_string())
                .collect()
        })
        .unwrap_or_default()
}

/// Follows the metrics stream until the job finishes.
async fn drain(app: &Router, id: u64) -> (String, Vec<Value>) {
    let mut since = 0;
    let mut points = Vec::new();
    for _ in 0..10_000 {
        let (status, page) = call(
            app,
            Method::GET,
            &format!("/api/jobs/{id}/metrics?since={since}&wait_ms=2000"),
            None,
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        let batch = page["points"].as_array().unwrap().clone();
        since = page["next"].as_u64().unwrap() as usize;
        let state = page["state"].as_str().unwrap().to_string();
        let finished = batch.is_empty() && (state == "done" || state == "failed");
        points.extend(batch);
        if finished {
            return (state, points);
        }
    }
    panic!("job {id} never finished");
}

#[tokio::test]
async fn compiles_the_one_check_tree() {
    let app = router(ServiceConfig::default());
    let (status, body) = call(&app, Method::POST, "/api/compile", Some(one_check_tree())).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["nodes"], 1);
    assert_eq!(body["leaves"], 2);
    assert_eq!(body["summary"], "1 node, 2 leaves");
    assert_eq!(body["model"]["format"], "prolonet-v1");
}

#[tokio::test]
async fn invalid_trees_get_per_node_messages() {
    let app = router(ServiceConfig::default());
    let tree = json!({
        "format": "treespec-v1",
        "domain": "cartpole",
        "root": {"check": {
            "terms": [{"feature": "speed"}],
            "op": ">", "value": 0.0,
            "then": {"action": "jump"}
        }}
    });
    let (status, body) = call(&app, Method::POST, "/api/compile", Some(tree)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let errs = errors(&body);
    assert!(
        errs.iter()
            .any(|e| e.starts_with("root:") && e.contains("speed")),
        "{errs:?}"
    );
    assert!(
        errs.iter()
            .any(|e| e.starts_with("root.then") && e.contains("jump")),
        "{errs:?}"
    );
    assert!(
        errs.iter()
            .any(|e| e.starts_with("root.else") && e.contains("missing")),
        "{errs:?}"
    );

    let (status, body) = call(
        &app,
        Method::POST,
        "/api/compile",
        Some(json!("not a tree")),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(!errors(&body).is_empty());
}

#[tokio::test]
async fn wrong_domain_vocabulary_is_rejected() {
    let app = router(ServiceConfig::default());
    let mut tree = one_check_tree();
    tree["domain"] = json!("wildfire");
    let (status, _) = call(&app, Method::POST, "/api/compile", Some(tree)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

/// Randomly breaks a valid document in one of several ways.
fn mutate(doc: &mut Value, rng: &mut ChaCha8Rng) {
    fn first_check(v: &mut Value) -> Option<&mut Value> {
        if v.get("check").is_some() {
            return v.get_mut("check");
        }
        None
    }
    let root = doc.get_mut("root").unwrap();
    match rng.random_range(0..6) {
        0 => *root = json!({"action": "nowhere"}),
        1 => {
            if let Some(c) = first_check(root) {
                c.as_object_mut().unwrap().remove("else");
            }
        }
        2 => {
            if let Some(c) = first_check(root) {
                c["terms"] = json!([]);
            }
        }
        3 => {
            if let Some(c) = first_check(root) {
                c["op"] = json!(">=");
            }
        }
        4 => doc["format"] = json!("treespec-v0"),
        _ => {}
    }
}

#[tokio::test]
async fn accepted_trees_always_compile() {
    let app = router(ServiceConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut accepted, mut rejected) = (0, 0);
    for _ in 0..200 {
        let checks = rng.random_range(0..8);
        let spec = random_tree_spec(checks, 3, 2, &mut rng);
        let mut doc = serde_json::to_value(TreeSpecDoc::from_spec(&spec)).unwrap();
        mutate(&mut doc, &mut rng);
        let (status, body) = call(&app, Method::POST, "/api/compile", Some(doc.clone())).await;
        let parsed: TreeSpecDoc = serde_json::from_value(doc).unwrap();
        match status {
            StatusCode::OK => {
                accepted += 1;
                let spec = parsed.to_spec().expect("accepted by the server");
                let net = compile_tree(&spec, 3, 2).unwrap();
                assert_eq!(body["nodes"].as_u64().unwrap() as usize, net.nodes().len());
                assert_eq!(
                    body["leaves"].as_u64().unwrap() as usize,
                    net.leaves().len()
                );
            }
            StatusCode::BAD_REQUEST => {
                rejected += 1;
                assert!(parsed.to_spec().is_err());
                assert!(!errors(&body).is_empty());
            }
            other => panic!("unexpected status {other}"),
        }
    }
    assert!(
        accepted > 20 && rejected > 20,
        "{accepted} accepted, {rejected} rejected"
    );
}

#[tokio::test]
async fn domain_vocabulary_matches_the_environments() {
    let app = router(ServiceConfig::default());
    let (status, body) = call(&app, Method::GET, "/api/domains", None).await;
    assert_eq!(status, StatusCode::OK);
    let domains = body["domains"].as_array().unwrap();
    assert_eq!(domains.len(), 2);
    for d in domains {
        let domain = Domain::from_name(d["name"].as_str().unwrap()).unwrap();
        let features: Vec<String> = serde_json::from_value(d["features"].clone()).unwrap();
        let actions: Vec<String> = serde_json::from_value(d["actions"].clone()).unwrap();
        assert_eq!(features, domain.feature_names());
        assert_eq!(actions, domain.action_names());
        let checks = d["checks"].as_array().unwrap();
        // every feature offered with both comparison directions
        assert_eq!(checks.len(), 2 * features.len());
        for f in &features {
            let ops: Vec<&str> = checks
                .iter()
                .filter(|c| c["feature"] == f.as_str())
                .map(|c| c["op"].as_str().unwrap())
                .collect();
            assert_eq!(ops.len(), 2);
            assert!(ops.contains(&">") && ops.contains(&"<"));
        }
    }

    // fire 1 north-west of drone 0, which is the closest drone to both fires
    let state = WildfireState {
        fires: [
            Fire {
                position: (100.0, 400.0),
                velocity: (0.0, 0.0),
            },
            Fire {
                position: (300.0, 250.0),
                velocity: (0.0, 0.0),
            },
        ],
        drones: [(200.0, 300.0), (490.0, 10.0)],
    };
    let obs = state.observation(0, 500.0);
    let wildfire = domains.iter().find(|d| d["name"] == "wildfire").unwrap();
    let holds = |label: &str| {
        let c = wildfire["checks"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["label"] == label)
            .unwrap();
        let i = Domain::Wildfire
            .feature_names()
            .iter()
            .position(|f| c["feature"] == f.as_str())
            .unwrap();
        let v = c["value"].as_f64().unwrap();
        if c["op"] == ">" {
            obs[i] > v
        } else {
            obs[i] < v
        }
    };
    assert!(holds("Fire 1 is to my north"));
    assert!(holds("Fire 1 is to my west"));
    assert!(!holds("Fire 1 is to my east"));
    assert!(holds("Fire 2 is to my south"));
    assert!(holds("Fire 2 is to my east"));
    assert!(holds("I am the closest drone to Fire 1"));
    assert!(!holds("I am not the closest drone to Fire 2"));
}

#[tokio::test]
async fn zero_episode_job_only_evaluates() {
    let app = router(ServiceConfig::default());
    let cfg = json!({"domain": "cartpole", "episodes": 0, "seeds": [2], "eval_episodes": 3, "tree_spec": one_check_tree()});
    let (status, body) = call(&app, Method::POST, "/api/train", Some(cfg)).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{body}");
    let id = body["id"].as_u64().unwrap();
    let (state, points) = drain(&app, id).await;
    assert_eq!(state, "done");
    assert!(points.is_empty());
    let (status, snap) = call(&app, Method::GET, &format!("/api/jobs/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let summary = &snap["summaries"][0];
    assert_eq!(summary["episodes_run"], 0);
    assert_eq!(summary["initial"]["episodes"], 3);
    assert!(summary["trained"].is_null());
}

#[tokio::test]
async fn streamed_curve_matches_a_direct_run() {
    let app = router(ServiceConfig::default());
    let cfg = json!({"domain": "wildfire", "episodes": 12, "seeds": [5], "eval_episodes": 2});
    let (status, body) = call(&app, Method::POST, "/api/train", Some(cfg.clone())).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let id = body["id"].as_u64().unwrap();
    let (state, points) = drain(&app, id).await;
    assert_eq!(state, "done");
    assert_eq!(points.len(), 12);
    for (k, p) in points.iter().enumerate() {
        assert_eq!(p["index"], k);
        assert_eq!(p["episode"], k);
    }

    let direct = run_seed(
        &serde_json::from_value::<RunConfig>(cfg).unwrap(),
        None,
        5,
        None,
        |_| true,
    )
    .unwrap();
    let streamed: Vec<u64> = points
        .iter()
        .map(|p| p["reward"].as_f64().unwrap().to_bits())
        .collect();
    let expected: Vec<u64> = direct
        .report
        .rewards()
        .iter()
        .map(|r| r.to_bits())
        .collect();
    assert_eq!(streamed, expected);

    let (status, eval) = call(
        &app,
        Method::POST,
        &format!("/api/jobs/{id}/evaluate"),
        Some(json!({"episodes": 3})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{eval}");
    assert_eq!(eval["episodes"], 3);
    assert!(eval["mean_reward"].as_f64().unwrap() <= 0.0);
    assert!(eval["mean_fire_distance"].as_f64().unwrap() > 0.0);

    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/api/jobs/{id}/evaluate"),
        Some(json!({"episodes": 0})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn second_job_waits_and_cannot_be_evaluated_yet() {
    let app = router(ServiceConfig::default());
    let long = json!({"domain": "wildfire", "episodes": 60, "seeds": [0], "eval_episodes": 1});
    let short = json!({"domain": "cartpole", "episodes": 2, "seeds": [0], "eval_episodes": 1});
    let (_, a) = call(&app, Method::POST, "/api/train", Some(long)).await;
    let (_, b) = call(&app, Method::POST, "/api/train", Some(short)).await;
    let (a, b) = (a["id"].as_u64().unwrap(), b["id"].as_u64().unwrap());

    let (_, snap) = call(&app, Method::GET, &format!("/api/jobs/{b}"), None).await;
    assert_eq!(snap["state"], "queued");
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/api/jobs/{b}/evaluate"),
        Some(json!({"episodes": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");

    assert_eq!(drain(&app, a).await.0, "done");
    assert_eq!(drain(&app, b).await.0, "done");
}

#[tokio::test]
async fn unknown_jobs_are_not_found() {
    let app = router(ServiceConfig::default());
    for (method, uri, body) in [
        (Method::GET, "/api/jobs/77", None),
        (Method::GET, "/api/jobs/77/metrics", None),
        (
            Method::POST,
            "/api/jobs/77/evaluate",
            Some(json!({"episodes": 1})),
        ),
    ] {
        let (status, body) = call(&app, method, uri, body).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        assert!(errors(&body)[0].contains("77"));
    }
}

#[tokio::test]
async fn bad_run_configs_are_rejected() {
    let app = router(ServiceConfig::default());
    let mut bad_tree = one_check_tree();
    bad_tree["root"]["check"]["then"] = json!({"action": "up"});
    for cfg in [
        json!({"domain": "cartpole", "tree_spec": bad_tree}),
        json!({"domain": "cartpole", "tree": "/etc/passwd"}),
        json!({"domain": "cartpole", "out": "/tmp/x"}),
        json!({"domain": "cartpole", "seeds": []}),
        json!({"domain": "cartpole", "unknown_field": 1}),
        json!({"domain": "wildfire", "tree_spec": one_check_tree()}),
    ] {
        let (status, body) = call(&app, Method::POST, "/api/train", Some(cfg.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{cfg}: {body}");
        assert!(!errors(&body).is_empty());
    }
    let (_, body) = call(
        &app,
        Method::POST,
        "/api/train",
        Some(json!({"domain": "cartpole", "tree_spec": bad_tree})),
    )
    .await;
    assert!(errors(&body)
        .iter()
        .any(|e| e.starts_with("root.then") && e.contains("up")));
}
