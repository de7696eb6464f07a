//! Serving a state on an ephemeral port and a blocking client implementing
//! the session protocol over HTTP.
#![allow(dead_code)]

use std::sync::Arc;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use taxonomist_core::session::{CandidateList, Session, TaxonomyExport};
use taxonomist_server::{AppState, ErrorBody};

use crate::support::protocol::SessionApi;

/// Serves `state` on an ephemeral port from a background runtime.
pub fn spawn(state: Arc<AppState>) -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            taxonomist_server::serve(listener, state, std::future::pending()).await.unwrap();
        });
    });
    format!("http://{addr}/v1")
}

pub struct Http {
    pub base: String,
    pub client: Client,
}

impl Http {
    pub fn new(base: String) -> Self {
        Self { base, client: Client::new() }
    }

    pub fn raw_get(&self, path: &str) -> (StatusCode, String) {
        let r = self.client.get(format!("{}{path}", self.base)).send().unwrap();
        (r.status(), r.text().unwrap())
    }

    pub fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, String> {
        let r = self.client.get(format!("{}{path}", self.base)).send().unwrap();
        Self::decode(r)
    }

    pub fn post<T: DeserializeOwned>(&self, path: &str, body: Value) -> Result<T, String> {
        let r = self.client.post(format!("{}{path}", self.base)).json(&body).send().unwrap();
        Self::decode(r)
    }

    fn decode<T: DeserializeOwned>(r: reqwest::blocking::Response) -> Result<T, String> {
        if r.status().is_success() {
            Ok(r.json().unwrap())
        } else {
            Err(r.json::<ErrorBody>().unwrap().code)
        }
    }
}

impl SessionApi for Http {
    fn create_session(&self, output_id: &str) -> Result<Session, String> {
        self.post("/sessions", json!({ "output_id": output_id }))
    }
    fn seed(&self, sid: &str, item: &str) -> Result<Session, String> {
        self.post(&format!("/sessions/{sid}/seed"), json!({ "item_id": item }))
    }
    fn candidates(&self, sid: &str) -> Result<CandidateList, String> {
        self.post(&format!("/sessions/{sid}/candidates"), json!({}))
    }
    fn accept(&self, sid: &str, items: &[String]) -> Result<Session, String> {
        self.post(&format!("/sessions/{sid}/accept"), json!({ "item_ids": items }))
    }
    fn reject(&self, sid: &str, items: &[String]) -> Result<Session, String> {
        self.post(&format!("/sessions/{sid}/reject"), json!({ "item_ids": items }))
    }
    fn unignore(&self, sid: &str, items: &[String]) -> Result<Session, String> {
        self.post(&format!("/sessions/{sid}/unignore"), json!({ "item_ids": items }))
    }
    fn polygon(&self, sid: &str, output_id: &str, polygon: &[[f64; 2]]) -> Result<Session, String> {
        self.post(
            &format!("/sessions/{sid}/polygon"),
            json!({ "output_id": output_id, "polygon": polygon }),
        )
    }
    fn switch_output(&self, sid: &str, output_id: &str) -> Result<Session, String> {
        self.post(&format!("/sessions/{sid}/switch"), json!({ "output_id": output_id }))
    }
    fn commit(&self, sid: &str, label: &str) -> Result<Value, String> {
        self.post(&format!("/sessions/{sid}/commit"), json!({ "label": label }))
    }
    fn session(&self, sid: &str) -> Result<Session, String> {
        self.get(&format!("/sessions/{sid}"))
    }
    fn export(&self) -> Result<TaxonomyExport, String> {
        self.get("/taxonomy/export")
    }
}
