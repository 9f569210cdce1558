mod common;

use std::sync::Arc;

use common::*;
use dcpgraph_core::analytics::{batch_report, correlate, parse_phrases, render_report_tsv, Flag, Metric};
use dcpgraph_core::explorer::{explain_related, search_antonyms, search_related, FilterConfig};
use dcpgraph_core::lexicon::{RelationPredicate, ANTONYM};
use dcpgraph_core::service::{ApiRequest, Engine};
use dcpgraph_core::session::{
    ExpandVia, ExplorationSession, ManualClock, SessionConfig, Slot,
};
use serde_json::json;

fn wide() -> FilterConfig {
    FilterConfig { cos_max: 0.6, ..FilterConfig::default() }
}

#[test]
fn desk_fixture_loads_every_row() {
    let paths = dcpgraph_core::lexicon::LexiconPaths::in_dir(fixture_dir().join("desk"));
    let (store, report) =
        dcpgraph_core::lexicon::load_lexicon(&paths, dcpgraph_core::lexicon::FrequencyMode::PerMillion).unwrap();
    assert_eq!(report.edges.skipped, 0);
    assert_eq!(report.vectors.skipped, 0);
    assert_eq!(report.frequencies.skipped, 0);
    assert_eq!(report.pos.skipped, 0);
    assert_eq!(store.dimension(), 104);
    assert_eq!(store.vector_count(), 104);
    assert_eq!(store.edges().len(), 69);
}

#[test]
fn kinetic_has_one_related_neighbour() {
    let store = desk_store();
    let n = store.neighbors("kinetic", &RelationPredicate::not_antonym());
    let got: Vec<_> = n.iter().map(|n| (n.word.as_str(), n.relation.as_str(), n.weight)).collect();
    assert_eq!(got, [("dynamic", "RelatedTo", 1.0)]);
    assert!(store.neighbors("kinetic", &RelationPredicate::antonym()).is_empty());
}

#[test]
fn table5_regenerates_from_published_values() {
    let store = desk_store();
    let (phrases, errors) = parse_phrases(&fixture_text("table5_phrases.tsv"));
    assert!(errors.is_empty());
    let reports = batch_report(&store, &phrases, &FilterConfig::default());
    let rows = table5();
    assert_eq!(reports.len(), rows.len());
    for (r, want) in reports.iter().zip(&rows) {
        assert_eq!((r.w1.as_str(), r.w2.as_str()), (want.w1.as_str(), want.w2.as_str()));
        assert!(close(r.mean_freq, want.mean_freq, TABLE5_TOL), "{}: mean {:?} vs {:?}", want.id, r.mean_freq, want.mean_freq);
        assert!(close(r.cos_sim, want.cos_sim, TABLE5_TOL), "{}: cos {:?} vs {:?}", want.id, r.cos_sim, want.cos_sim);
    }
    let by_id = |id: &str| &reports[rows.iter().position(|r| r.id == id).unwrap()];
    let r10b = by_id("10-B");
    assert_eq!((r10b.freq_w1, r10b.freq_w2, r10b.mean_freq), (None, Some(1.45), Some(1.45)));
    let r8a = by_id("8-A");
    assert!(r8a.freq_w1.is_none() && r8a.freq_w2.is_none() && r8a.mean_freq.is_none() && r8a.cos_sim.is_none());
    assert!(render_report_tsv(&reports).contains("good-natured\tsafeness\tnull\tnull\tnull\tnull\tmissing_data"));
}

#[test]
fn sustainable_renewable_is_flagged() {
    let store = desk_store();
    let r = dcpgraph_core::score_dcp(&store, "sustainable", "renewable", &FilterConfig::default());
    assert_eq!(r.flags.iter().copied().collect::<Vec<_>>(), [Flag::HighSimilarity, Flag::HighFrequency]);
}

#[test]
fn narrated_cases_correlate_strongly_negative() {
    let store = desk_store();
    let phrases: Vec<(String, String)> =
        NARRATED_CASES.iter().map(|(a, b, _, _)| (a.to_string(), b.to_string())).collect();
    let reports = batch_report(&store, &phrases, &FilterConfig::default());
    let ratings: Vec<f64> = NARRATED_CASES.iter().map(|c| c.3).collect();
    let got = correlate(&reports, &ratings, Metric::CosSim).unwrap();
    let xs: Vec<f64> = NARRATED_CASES.iter().map(|c| c.2).collect();
    let want = pearson_by_hand(&xs, &ratings);
    assert!((want - -0.96666).abs() < 1e-4);
    assert!((got.result.r - want).abs() < 1e-6);
    assert!(got.result.r < 0.0 && got.result.r.abs() >= 0.9);
}

#[test]
fn sustainable_neighbourhood_matches_counts() {
    let store = desk_store();
    let related = search_related(&store, "sustainable", &wide()).unwrap();
    let words: Vec<&str> = related.iter().map(|r| r.word.as_str()).collect();
    assert_eq!(words, ["renewable", "green", "ecological", "continuous", "durable", "viable"]);
    let default = search_related(&store, "sustainable", &FilterConfig::default()).unwrap();
    assert_eq!(default.len(), 5);
    let rejected: Vec<_> = explain_related(&store, "sustainable", &wide())
        .unwrap()
        .into_iter()
        .filter(|d| !d.accepted)
        .map(|d| d.word)
        .collect();
    assert_eq!(rejected, ["ecofriendly", "enduring", "environmental", "lasting", "sustainability"]);
}

fn case2a_live() -> (ExplorationSession, Vec<usize>) {
    let store = desk_store();
    let clock = Arc::new(ManualClock::new(0));
    let cfg = SessionConfig { filter: wide(), allow_reorder: false };
    let mut s = ExplorationSession::new("case-2a", "A", cfg, clock.clone());
    let mut added = Vec::new();
    let steps: [(u64, ExpandVia, &str); 5] = [
        (4_000, ExpandVia::Query, "sustainable"),
        (31_000, ExpandVia::ExpandClick, "renewable"),
        (45_000, ExpandVia::ExpandClick, "continuous"),
        (52_000, ExpandVia::ExpandClick, "imperfect"),
        (59_000, ExpandVia::ExpandClick, "flawed"),
    ];
    for (at, via, w) in steps {
        clock.set(at);
        let d = s.expand(&store, w, via).unwrap();
        added.push(d.added_nodes.iter().filter(|n| n.word != w).count());
    }
    for (at, slot, w) in [
        (66_000, Slot::W1, "sustainable"),
        (71_000, Slot::W2, "renewable"),
        (76_000, Slot::W3, "imperfect"),
        (80_000, Slot::W4, "flawed"),
    ] {
        clock.set(at);
        s.set_slot(&store, slot, w).unwrap();
    }
    clock.set(83_000);
    s.close().unwrap();
    (s, added)
}

#[test]
fn case2a_live_session_matches_narration() {
    let store = desk_store();
    let (s, added) = case2a_live();
    assert_eq!(added, [6, 5, 17, 14, 1]);
    assert_eq!(s.pool(), ["sustainable", "renewable", "continuous", "imperfect", "flawed"]);
    assert!(s.cs().is_complete());
    let r = s.session_report(&store).unwrap();
    assert_eq!(r.word_count, 5);
    assert_eq!(r.duration_ms, 83_000);
    assert!((r.dcp.cos_sim.unwrap() - 0.572).abs() < 1e-9);
    assert!((r.dcp.mean_freq.unwrap() - 66.74).abs() < 1e-9);
    assert_eq!(s.to_log(), fixture_text("case2a.log"));
}

#[test]
fn case2a_log_replays_byte_identically() {
    let store = desk_store();
    let log = fixture_text("case2a.log");
    let a = ExplorationSession::replay(&store, &log).unwrap();
    let b = ExplorationSession::replay(&store, &log).unwrap();
    assert_eq!(a.state_json(), b.state_json());
    assert_eq!(a.to_log(), log);
    assert_eq!(a.events().len(), 14);
    assert_eq!(a.pool().len(), 5);
    assert_eq!(a.cs().dcp(), Some(("sustainable", "renewable")));
    assert_eq!(a.session_report(&store).unwrap().duration_ms, 83_000);
    let (live, _) = case2a_live();
    assert_eq!(a.state_json(), live.state_json());
}

#[test]
fn case2a_map_matches_eigensolver_oracle() {
    let store = desk_store();
    let s = ExplorationSession::replay(&store, &fixture_text("case2a.log")).unwrap();
    let map = s.exploration_map(&store, 2).unwrap();
    let words: Vec<&str> = map.points.iter().map(|p| p.word.as_str()).collect();
    assert_eq!(words, ["sustainable", "renewable", "continuous", "imperfect", "flawed"]);
    assert!(map.unplottable.is_empty());
    let vectors: Vec<Vec<f64>> =
        words.iter().map(|w| store.vector_of(w).unwrap().components.clone()).collect();
    let (vals, coords) = oracle_pca(&vectors, 2);
    for (p, want) in map.points.iter().zip(&coords) {
        for (a, b) in p.coords.iter().zip(want) {
            assert!((a - b).abs() < 1e-6, "{}: {a} vs {b}", p.word);
        }
    }
    for (a, b) in map.explained_variance.iter().zip(&vals) {
        assert!((a - b).abs() < 1e-6);
    }
    let query = &map.points[0].events;
    assert_eq!((query[0].seq, query[0].kind), (1, dcpgraph_core::session::EventKind::Query));
}

#[test]
fn case1a_offers_oblivious_for_w3() {
    let store = desk_store();
    let mut s = ExplorationSession::new("case-1a", "B", SessionConfig::default(), Arc::new(ManualClock::new(0)));
    s.expand(&store, "cognizant", ExpandVia::Query).unwrap();
    let o = s.set_slot(&store, Slot::W1, "cognizant").unwrap();
    assert_eq!(o.triggered, ["aware", "mindful", "attentive"]);
    let err = s.set_slot(&store, Slot::W2, "inclusive").unwrap_err();
    assert_eq!(err.kind(), "word_not_available");
    s.expand(&store, "inclusive", ExpandVia::Query).unwrap();
    let o = s.set_slot(&store, Slot::W2, "inclusive").unwrap();
    assert!(o.triggered.contains(&"oblivious".to_string()));
    assert_eq!(o.triggered, search_antonyms(&store, "cognizant", &FilterConfig::default()).unwrap());
    let delta = o.delta.unwrap();
    assert!(delta.added_links.iter().all(|l| l.relation == ANTONYM && l.from == "cognizant"));
    s.set_slot(&store, Slot::W3, "oblivious").unwrap();
    assert_eq!(s.cs().next_slot(), Some(Slot::W4));
    let r = s.session_report(&store).unwrap();
    assert!((r.dcp.cos_sim.unwrap() - 0.105).abs() < 1e-9);
}

fn engine() -> Engine {
    Engine::with_clock(Arc::new(desk_store()), SessionConfig::default(), Arc::new(ManualClock::new(0)))
}

#[test]
fn api_rejects_noun_query() {
    let e = engine();
    let r = e.dispatch(&ApiRequest::get("/related?word=utopia"));
    assert_eq!(r.status, 400);
    assert_eq!(r.error_kind(), Some("non_adjective"));
    assert_eq!(r.body["schema_version"], 1);
    let r = e.dispatch(&ApiRequest::get("/related?word=qwzrt"));
    assert_eq!((r.status, r.error_kind()), (404, Some("unknown_word")));
}

#[test]
fn api_scores_phrase() {
    let e = engine();
    let r = e.dispatch(&ApiRequest::get("/score?w1=cognizant&w2=inclusive"));
    assert_eq!(r.status, 200);
    assert!((r.body["cos_sim"].as_f64().unwrap() - 0.105).abs() < 1e-9);
    assert_eq!(r.body["schema_version"], 1);
    let again = e.dispatch(&ApiRequest::get("/score?w1=cognizant&w2=inclusive"));
    assert_eq!(r, again);
}

#[test]
fn api_related_mirrors_library_and_filters() {
    let e = engine();
    let store = desk_store();
    let r = e.dispatch(&ApiRequest::get("/related?word=sustainable&max-cos=0.6"));
    let words: Vec<&str> = r.body["results"].as_array().unwrap().iter().map(|v| v["word"].as_str().unwrap()).collect();
    let lib: Vec<String> = search_related(&store, "sustainable", &wide()).unwrap().into_iter().map(|r| r.word).collect();
    assert_eq!(words, lib);
    let r = e.dispatch(&ApiRequest::get("/antonyms?word=cognizant"));
    assert_eq!(r.body["results"], json!(search_antonyms(&store, "cognizant", &FilterConfig::default()).unwrap()));
    let r = e.dispatch(&ApiRequest::get("/related?word=sustainable&min_cos=0.9"));
    assert_eq!((r.status, r.error_kind()), (400, Some("invalid_config")));
}

#[test]
fn api_word_lookup() {
    let e = engine();
    let r = e.dispatch(&ApiRequest::get("/word/oblivious"));
    assert_eq!(r.status, 200);
    assert_eq!(r.body["pos"], "adjective");
    assert_eq!(r.body["gloss"], "not aware of what is happening around one");
    assert_eq!(r.body["freq"], 3.2);
    let r = e.dispatch(&ApiRequest::get("/word/qwzrt"));
    assert_eq!(r.status, 404);
}

#[test]
fn api_session_flow() {
    let e = engine();
    let created = e.dispatch(&ApiRequest::post("/session", json!({"brief_id": "B"})));
    assert_eq!(created.status, 201);
    let id = created.body["id"].as_str().unwrap().to_string();
    let other = e.dispatch(&ApiRequest::post("/session", json!({})));
    assert_ne!(other.body["id"], created.body["id"]);

    let r = e.dispatch(&ApiRequest::post(&format!("/session/{id}/expand"), json!({"word": "cognizant"})));
    assert_eq!(r.status, 200);
    assert_eq!(r.body["delta"]["cluster"], 1);

    let r = e.dispatch(&ApiRequest::post(&format!("/session/{id}/slot"), json!({"slot": "w2", "word": "aware"})));
    assert_eq!((r.status, r.error_kind()), (409, Some("out_of_order")));

    let r = e.dispatch(&ApiRequest::post(&format!("/session/{id}/slot?slot=w1&word=cognizant"), json!(null)));
    assert_eq!(r.status, 200);
    assert_eq!(r.body["cs"]["w1"], "cognizant");

    let r = e.dispatch(&ApiRequest::get(&format!("/session/{id}/report")));
    assert_eq!((r.status, r.error_kind()), (409, Some("incomplete_cs")));

    let r = e.dispatch(&ApiRequest::post(&format!("/session/{id}/pool"), json!({"word": "aware"})));
    assert_eq!(r.body["pool"], json!(["cognizant", "aware"]));
    let r = e.dispatch(&ApiRequest::post(&format!("/session/{id}/slot"), json!({"slot": "w2", "word": "aware"})));
    assert_eq!(r.status, 200);
    let r = e.dispatch(&ApiRequest::get(&format!("/session/{id}/report")));
    assert_eq!(r.status, 200);
    assert_eq!(r.body["word_count"], 2);

    let r = e.dispatch(&ApiRequest::get(&format!("/session/{id}/map")));
    assert_eq!(r.status, 200);
    assert_eq!(r.body["points"].as_array().unwrap().len(), 2);

    let log = e.dispatch(&ApiRequest::get(&format!("/session/{id}/log")));
    let log = log.body["log"].as_str().unwrap().to_string();
    let r = e.dispatch(&ApiRequest::post("/session/replay", json!({ "log": log })));
    assert_eq!((r.status, r.error_kind()), (409, Some("duplicate_session")));

    assert_eq!(e.dispatch(&ApiRequest::post(&format!("/session/{id}/clear"), json!({}))).status, 200);
    assert_eq!(e.dispatch(&ApiRequest::post(&format!("/session/{id}/close"), json!({}))).status, 200);
    let r = e.dispatch(&ApiRequest::post(&format!("/session/{id}/expand"), json!({"word": "aware"})));
    assert_eq!((r.status, r.error_kind()), (409, Some("session_closed")));

    let r = e.dispatch(&ApiRequest::get("/session/nope"));
    assert_eq!((r.status, r.error_kind()), (404, Some("unknown_session")));
    let r = e.dispatch(&ApiRequest::get("/session/nope/expand"));
    assert_eq!((r.status, r.error_kind()), (405, Some("method_not_allowed")));
    let r = e.dispatch(&ApiRequest::get("/nowhere"));
    assert_eq!(r.status, 404);
}

#[test]
fn api_replays_log_fixture() {
    let e = engine();
    let r = e.dispatch(&ApiRequest::post("/session/replay", json!({ "log": fixture_text("case2a.log") })));
    assert_eq!(r.status, 201);
    assert_eq!(r.body["pool"].as_array().unwrap().len(), 5);
    let r = e.dispatch(&ApiRequest::get("/session/case-2a/report"));
    assert_eq!(r.body["duration_ms"], 83_000);
    let r = e.dispatch(&ApiRequest::post("/session/replay", json!({ "log": "garbage" })));
    assert_eq!((r.status, r.error_kind()), (400, Some("bad_log")));
}

#[test]
fn api_correlates() {
    let e = engine();
    let store = desk_store();
    let phrases: Vec<(String, String)> =
        NARRATED_CASES.iter().map(|(a, b, _, _)| (a.to_string(), b.to_string())).collect();
    let report = render_report_tsv(&batch_report(&store, &phrases, &FilterConfig::default()));
    let ratings = "rating\n6.5\n5.0\n1.5\n2.5\n";
    let r = e.dispatch(&ApiRequest::post(
        "/correlate",
        json!({"report": report, "ratings": ratings, "metric": "cos_sim"}),
    ));
    assert_eq!(r.status, 200);
    assert!(r.body["r"].as_f64().unwrap() < -0.9);
    let r = e.dispatch(&ApiRequest::post(
        "/correlate",
        json!({"report": report, "ratings": "1\n2\n", "metric": "cos_sim"}),
    ));
    assert_eq!((r.status, r.error_kind()), (409, Some("length_mismatch")));
    let r = e.dispatch(&ApiRequest::post(
        "/correlate",
        json!({"report": report, "ratings": ratings, "metric": "vibes"}),
    ));
    assert_eq!((r.status, r.error_kind()), (400, Some("unknown_metric")));
}
