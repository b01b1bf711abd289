//! Hands a finalized transaction to an Esplora-style endpoint.

use crate::error::SessionError;

/// POSTs the hex transaction to `{endpoint}/tx` and returns the body, which
/// such endpoints set to the txid. A non-success status is passed through
/// with the endpoint's own text.
pub async fn post_tx(endpoint: &str, tx_hex: &str) -> Result<String, SessionError> {
    let url = format!("{}/tx", endpoint.trim_end_matches('/'));
    let resp = reqwest::Client::new()
        .post(url)
        .header("content-type", "text/plain")
        .body(tx_hex.to_owned())
        .send()
        .await
        .map_err(|e| SessionError::EndpointUnreachable(e.to_string()))?;
    let status = resp.status();
    let body = resp.text().await.map_err(|e| SessionError::EndpointUnreachable(e.to_string()))?;
    if !status.is_success() {
        return Err(SessionError::EndpointRejects { status: status.as_u16(), body });
    }
    Ok(body.trim().to_owned())
}
