use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use fdexplain::lang::{DiagnosisKind, DiagnosisReport, SessionState};
use fdexplain::Strategy;
use fdexplain_service::cli::{diagnose_report, DiagnoseRequest};
use fdexplain_service::http::{router, AppState, ExplanationReply, ModelSummary, SessionReply};
use fdexplain_service::{schedule_for, LoadedModel};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn model_text(name: &str) -> String {
    let path = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name);
    std::fs::read_to_string(path).unwrap()
}

async fn send(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    send_raw(app, req.body(body).unwrap()).await
}

async fn send_raw(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn post_model(app: &Router, name: &str) -> ModelSummary {
    let (status, body) = send(app, Method::POST, "/models", Some(json!({ "model": model_text(name) }))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    serde_json::from_value(body).unwrap()
}

async fn open_session(app: &Router, model: &str, var: &str, value: i64, strategy: &str) -> SessionReply {
    let (status, body) = send(
        app,
        Method::POST,
        &format!("/models/{model}/sessions"),
        Some(json!({ "var": var, "value": value, "strategy": strategy })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    serde_json::from_value(body).unwrap()
}

async fn answer(app: &Router, session: &str, answer: &str) -> (StatusCode, Value) {
    send(
        app,
        Method::POST,
        &format!("/sessions/{session}/answer"),
        Some(json!({ "answer": answer })),
    )
    .await
}

#[tokio::test]
async fn model_summary_lists_the_closure() {
    let app = router(AppState::default());
    let summary = post_model(&app, "conference.fd").await;
    assert_eq!(summary.closure, "AM: 1 2\nMA: 2 3\nMP: 2 3\nPM: 1 2\n");
    assert_eq!(summary.removed, 8);
    assert_eq!(summary.variables[0].name, "AM");
    assert_eq!(summary.variables[0].kept, [1, 2]);
    assert_eq!(summary.constraints.len(), 9);
    let (status, body) = send(&app, Method::GET, &format!("/models/{}", summary.id), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_value::<ModelSummary>(body).unwrap(), summary);
}

#[tokio::test]
async fn models_can_be_posted_as_plain_text() {
    let app = router(AppState::default());
    let req = Request::builder()
        .method(Method::POST)
        .uri("/models")
        .header(header::CONTENT_TYPE, "text/plain")
        .body(Body::from(model_text("conference_buggy.fd")))
        .unwrap();
    let (status, body) = send_raw(&app, req).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["closure"], "AM:\nMA:\nMP:\nPM:\n");
}

#[tokio::test]
async fn malformed_models_are_rejected() {
    let app = router(AppState::default());
    let (status, body) = send(&app, Method::POST, "/models", Some(json!({ "model": "X > Y;" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("unknown variable"), "{body}");
    let (status, _) = send(&app, Method::POST, "/models", Some(json!({ "text": "" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn explanations() {
    let app = router(AppState::default());
    let buggy = post_model(&app, "conference_buggy.fd").await;
    let (status, body) = send(&app, Method::GET, &format!("/models/{}/explanation?var=AM&value=1", buggy.id), None).await;
    assert_eq!(status, StatusCode::OK);
    let reply: ExplanationReply = serde_json::from_value(body).unwrap();
    assert!(!reply.kept);
    let doc = reply.explanation.unwrap();
    assert_eq!(doc.nodes.len(), 8);
    assert_eq!(doc.metadata.model_hash, buggy.model_hash);

    let correct = post_model(&app, "conference.fd").await;
    let (status, body) = send(&app, Method::GET, &format!("/models/{}/explanation?var=AM&value=1", correct.id), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["kept"], true);
    assert!(body["explanation"].is_null());

    for query in ["var=AM&value=9", "var=ZZ&value=1", "var=AM", "value=1", "var=AM&value=x"] {
        let (status, _) = send(&app, Method::GET, &format!("/models/{}/explanation?{query}", buggy.id), None).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{query}");
    }
    let (status, _) = send(&app, Method::GET, "/models/nope/explanation?var=AM&value=1", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn worked_session_over_http() {
    let app = router(AppState::default());
    let model = post_model(&app, "conference_buggy.fd").await;
    let opened = open_session(&app, &model.id, "AM", 1, "dac").await;
    assert_eq!(opened.view.state, SessionState::QuestionPending);
    assert_eq!(opened.view.nodes.len(), 8);
    let q = opened.view.question.as_ref().unwrap();
    assert_eq!(q.pair.label, "(MA,3)");
    assert_eq!(q.sentence, "Is (MA,3) expected to be kept?");

    let mut asked = vec![q.pair.label.clone()];
    for a in ["YES", "yes", "No"] {
        let (status, body) = answer(&app, &opened.id, a).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        let reply: SessionReply = serde_json::from_value(body).unwrap();
        if let Some(q) = reply.view.question {
            asked.push(q.pair.label);
        }
    }
    assert_eq!(asked, ["(MA,3)", "(PM,2)", "(MP,1)"]);

    let (status, body) = send(&app, Method::GET, &format!("/sessions/{}", opened.id), None).await;
    assert_eq!(status, StatusCode::OK);
    let done: SessionReply = serde_json::from_value(body).unwrap();
    assert_eq!(done.view.state, SessionState::Done);
    assert!(done.view.question.is_none());
    let report = done.view.diagnosis.unwrap();
    assert_eq!(report.kind, DiagnosisKind::Located);
    assert_eq!(report.faults[0].constraint, "PM>MP");
    assert_eq!(report.faults[0].rule, "(PM,2) <- (MP,1)");
    // NO on (MP,1) pruned its node.
    let mp1 = done.view.nodes.iter().find(|n| n.pair.label == "(MP,1)").unwrap();
    assert!(mp1.pruned);

    let (status, body) = answer(&app, &opened.id, "YES").await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
}

#[tokio::test]
async fn cli_and_http_reports_are_identical() {
    for (strategy, script) in [("dac", "yes\nyes\nno\n"), ("topdown", "no\nyes\nno\nyes\nno\n")] {
        let app = router(AppState::default());
        let model = post_model(&app, "conference_buggy.fd").await;
        let opened = open_session(&app, &model.id, "AM", 1, strategy).await;
        let answers: Vec<&str> = script.lines().collect();
        let mut used = 0;
        let mut view = opened.view;
        while view.state == SessionState::QuestionPending {
            let (status, body) = answer(&app, &opened.id, answers[used]).await;
            assert_eq!(status, StatusCode::OK, "{body}");
            used += 1;
            view = serde_json::from_value::<SessionReply>(body).unwrap().view;
        }
        let http_report = view.diagnosis.unwrap();

        let loaded = LoadedModel::from_text(&model_text("conference_buggy.fd"), schedule_for(None)).unwrap();
        let script_text = answers[..used].join("\n");
        let request = DiagnoseRequest {
            expected: &model_text("conference.expect"),
            symptom: Some("AM=1"),
            strategy: strategy.parse::<Strategy>().unwrap(),
            script: Some(&script_text),
            echo: false,
        };
        let cli_report: DiagnosisReport =
            diagnose_report(&loaded, &request, &mut std::io::empty(), &mut std::io::sink()).unwrap();
        assert_eq!(cli_report, http_report, "{strategy}");
        assert_eq!(
            serde_json::to_value(&cli_report).unwrap(),
            serde_json::to_value(&http_report).unwrap()
        );
    }
}

#[tokio::test]
async fn question_sequences_are_deterministic() {
    let mut sequences = Vec::new();
    for _ in 0..3 {
        let app = router(AppState::default());
        let model = post_model(&app, "conference_buggy.fd").await;
        let opened = open_session(&app, &model.id, "AM", 1, "dac").await;
        let mut seq = vec![opened.view.question.unwrap().pair.label];
        for a in ["UNKNOWN", "UNKNOWN", "UNKNOWN", "UNKNOWN", "UNKNOWN", "UNKNOWN"] {
            let (status, body) = answer(&app, &opened.id, a).await;
            if status == StatusCode::CONFLICT {
                break;
            }
            let reply: SessionReply = serde_json::from_value(body).unwrap();
            match reply.view.question {
                Some(q) => seq.push(q.pair.label),
                None => {
                    let report = reply.view.diagnosis.unwrap();
                    assert_eq!(report.kind, DiagnosisKind::Candidates);
                    assert!(!report.faults.is_empty());
                }
            }
        }
        sequences.push(seq);
    }
    assert!(sequences.windows(2).all(|w| w[0] == w[1]), "{sequences:?}");
}

#[tokio::test]
async fn session_errors() {
    let app = router(AppState::default());
    let (status, _) = send(&app, Method::GET, "/sessions/unknown", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = answer(&app, "unknown", "YES").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = send(&app, Method::POST, "/models/unknown/sessions", Some(json!({"var": "AM", "value": 1}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let correct = post_model(&app, "conference.fd").await;
    let (status, body) = send(
        &app,
        Method::POST,
        &format!("/models/{}/sessions", correct.id),
        Some(json!({"var": "AM", "value": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("not a symptom"), "{body}");

    let buggy = post_model(&app, "conference_buggy.fd").await;
    let uri = format!("/models/{}/sessions", buggy.id);
    for bad in [
        json!({"var": "AM", "value": 1, "strategy": "sideways"}),
        json!({"var": "AM"}),
        json!({"var": "AM", "value": 1, "expected": "AM: 3"}),
        json!({"var": "AM", "value": 1, "expected": "AM: 9"}),
    ] {
        let (status, body) = send(&app, Method::POST, &uri, Some(bad.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad}: {body}");
    }
    let with_expected = send(
        &app,
        Method::POST,
        &uri,
        Some(json!({"var": "AM", "value": 1, "expected": model_text("conference.expect")})),
    )
    .await;
    assert_eq!(with_expected.0, StatusCode::CREATED);

    let opened = open_session(&app, &buggy.id, "AM", 1, "topdown").await;
    let (status, _) = answer(&app, &opened.id, "perhaps").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, body) = send(
        &app,
        Method::POST,
        &format!("/sessions/{}/answer", opened.id),
        Some(json!({"answer": "YES", "var": "MP", "value": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    let req = Request::builder()
        .method(Method::POST)
        .uri(format!("/sessions/{}/answer", opened.id))
        .body(Body::from("no"))
        .unwrap();
    let (status, body) = send_raw(&app, req).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["transcript"][0]["answer"], "NO");
}
