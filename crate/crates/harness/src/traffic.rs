//! The two observable modes: cacheable static serving and uncacheable live relay.

use serde::Serialize;

use crate::transcript::{Collector, HttpEntry, Transcript};

/// Assets a visitor's browser fetches to load the app.
pub const APP_ASSETS: [&str; 2] = ["/app.js", "/app.css"];

#[derive(Debug, Clone, Serialize)]
pub struct TrafficReport {
    pub visitors: usize,
    pub static_requests: usize,
    pub ws_requests: usize,
    pub requests_per_visitor: Option<f64>,
    pub cacheable_fraction_static: Option<f64>,
    pub cacheable_fraction_ws: Option<f64>,
}

/// Shared caches may keep the response: `public` or a positive max-age,
/// and nothing forbidding it.
pub fn is_cacheable(cache_control: Option<&str>) -> bool {
    let Some(cc) = cache_control else { return false };
    let directives: Vec<String> = cc.split(',').map(|d| d.trim().to_ascii_lowercase()).collect();
    if directives.iter().any(|d| d == "no-store" || d == "no-cache" || d == "private") {
        return false;
    }
    directives.iter().any(|d| {
        d == "public" || d.strip_prefix("max-age=").and_then(|n| n.parse::<u64>().ok()).is_some_and(|n| n > 0)
    })
}

fn fraction(total: usize, hits: usize) -> Option<f64> {
    (total > 0).then(|| hits as f64 / total as f64)
}

pub fn traffic_report(t: &Transcript) -> TrafficReport {
    let static_ok: Vec<&HttpEntry> = t.http.iter().filter(|e| e.status == 200 || e.status == 304).collect();
    let static_cacheable = static_ok.iter().filter(|e| is_cacheable(e.cache_control.as_deref())).count();
    let ws_cacheable = t.upgrades.iter().filter(|u| is_cacheable(u.cache_control.as_deref())).count();
    let requests = t.http.len() + t.upgrades.len();
    TrafficReport {
        visitors: t.visitors,
        static_requests: t.http.len(),
        ws_requests: t.upgrades.len(),
        requests_per_visitor: (t.visitors > 0).then(|| requests as f64 / t.visitors as f64),
        cacheable_fraction_static: fraction(static_ok.len(), static_cacheable),
        cacheable_fraction_ws: fraction(t.upgrades.len(), ws_cacheable),
    }
}

/// Loads the app the way a fresh browser would: the page, then its assets.
pub async fn load_app(base: &str, page: &str, visitor: usize, collector: &Collector) -> Result<(), reqwest::Error> {
    let client = reqwest::Client::new();
    for path in std::iter::once(page).chain(APP_ASSETS) {
        let resp = client.get(format!("{base}{path}")).send().await?;
        let cache_control = resp.headers().get("cache-control").and_then(|v| v.to_str().ok()).map(str::to_owned);
        collector.http(HttpEntry { visitor, path: path.to_owned(), status: resp.status().as_u16(), cache_control });
        resp.bytes().await?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cacheability() {
        assert!(is_cacheable(Some("public, max-age=86400")));
        assert!(is_cacheable(Some("max-age=60")));
        assert!(!is_cacheable(Some("max-age=0")));
        assert!(!is_cacheable(Some("no-store")));
        assert!(!is_cacheable(Some("public, no-cache")));
        assert!(!is_cacheable(None));
    }
}
