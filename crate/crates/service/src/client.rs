//! Blocking HTTP client that speaks the aggregator API.

use crowdpriv_core::protocol::{
    AggregatorApi, EpochAggregate, ProtocolError, QueryId, Response, SignedQuery,
};
use reqwest::blocking::{Client, RequestBuilder};
use serde::de::DeserializeOwned;

use crate::server::Registered;
use crate::wire::ErrorBody;

#[derive(Debug, Clone)]
pub struct HttpAggregator {
    base_url: String,
    client: Client,
}

fn transport(e: impl std::fmt::Display) -> ProtocolError {
    ProtocolError::Transport(e.to_string())
}

impl HttpAggregator {
    /// `server` is either `host:port` or a full `http://` URL.
    pub fn new(server: &str) -> Result<Self, ProtocolError> {
        let base_url = if server.starts_with("http://") || server.starts_with("https://") {
            server.trim_end_matches('/').to_string()
        } else {
            format!("http://{server}")
        };
        let client = Client::builder()
            .pool_max_idle_per_host(32)
            .build()
            .map_err(transport)?;
        Ok(Self { base_url, client })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base_url, path)
    }

    fn send(&self, req: RequestBuilder) -> Result<reqwest::blocking::Response, ProtocolError> {
        let resp = req.send().map_err(transport)?;
        if resp.status().is_success() {
            return Ok(resp);
        }
        let status = resp.status();
        let text = resp.text().map_err(transport)?;
        Err(match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => body.into_protocol_error(),
            Err(_) => ProtocolError::Transport(format!("HTTP {status}: {text}")),
        })
    }

    fn send_json<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<T, ProtocolError> {
        self.send(req)?.json().map_err(transport)
    }
}

fn segment(id: &QueryId) -> String {
    // Query ids are opaque; escape everything outside the unreserved set.
    id.as_str()
        .bytes()
        .map(|b| match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                (b as char).to_string()
            }
            _ => format!("%{b:02X}"),
        })
        .collect()
}

impl AggregatorApi for HttpAggregator {
    fn register_query(&self, sq: &SignedQuery, now: i64) -> Result<QueryId, ProtocolError> {
        let req = self
            .client
            .post(self.url(&format!("/queries?now={now}")))
            .json(sq);
        Ok(self.send_json::<Registered>(req)?.query_id)
    }

    fn fetch_queries(&self, now: i64) -> Result<Vec<SignedQuery>, ProtocolError> {
        self.send_json(self.client.get(self.url(&format!("/queries?now={now}"))))
    }

    fn submit_response(&self, response: &Response) -> Result<(), ProtocolError> {
        self.send(self.client.post(self.url("/responses")).json(response))
            .map(|_| ())
    }

    fn close_epoch(
        &self,
        query_id: &QueryId,
        epoch_index: u64,
        now: i64,
    ) -> Result<EpochAggregate, ProtocolError> {
        let path = format!("/epochs/{}/{epoch_index}/close?now={now}", segment(query_id));
        self.send_json(self.client.post(self.url(&path)))
    }

    fn get_aggregate(
        &self,
        query_id: &QueryId,
        epoch_index: u64,
    ) -> Result<EpochAggregate, ProtocolError> {
        let path = format!("/aggregates/{}/{epoch_index}", segment(query_id));
        self.send_json(self.client.get(self.url(&path)))
    }
}
