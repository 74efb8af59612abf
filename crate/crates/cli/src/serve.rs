//! Static file server for a bundle and the viewer assets.

use std::path::{Component, Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use tiny_http::{Header, Response, Server};

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Result bundle, served at /bundle.json.
    pub bundle: PathBuf,
    /// Directory of viewer assets served at /.
    #[arg(long)]
    pub assets: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8000)]
    pub port: u16,
    /// Stop after this many requests.
    #[arg(long)]
    pub max_requests: Option<usize>,
}

const FALLBACK_INDEX: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>lineage</title></head>\n\
<body><p>No viewer assets configured. The bundle is at <a href=\"bundle.json\">bundle.json</a>.</p></body></html>\n";

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("wasm") => "application/wasm",
        _ => "application/octet-stream",
    }
}

/// Maps a request path under `root`, refusing anything that leaves it.
fn resolve(root: &Path, url: &str) -> Option<PathBuf> {
    let path = url.split(['?', '#']).next().unwrap_or("");
    let rel = Path::new(path.trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    let mut full = root.join(rel);
    if full.is_dir() {
        full.push("index.html");
    }
    Some(full)
}

fn respond(
    req: tiny_http::Request,
    body: Vec<u8>,
    status: u16,
    ctype: &str,
) -> anyhow::Result<()> {
    let header = Header::from_bytes("Content-Type", ctype).expect("static header");
    req.respond(Response::from_data(body).with_status_code(status).with_header(header))
        .context("writing response")
}

pub fn run(args: &ServeArgs) -> anyhow::Result<()> {
    if !args.bundle.is_file() {
        bail!("bundle {} not found", args.bundle.display());
    }
    // validates the file before serving it
    lineage::io::read_bundle(&args.bundle)?;
    let server = Server::http((args.host.as_str(), args.port))
        .map_err(|e| anyhow::anyhow!("binding {}:{}: {e}", args.host, args.port))?;
    let addr = server.server_addr().to_ip().context("server address")?;
    println!("serving {} at http://{addr}/", args.bundle.display());

    for (served, req) in server.incoming_requests().enumerate() {
        let url = req.url().to_string();
        let path = url.split(['?', '#']).next().unwrap_or("").to_string();
        log::info!("{} {}", req.method(), url);
        if path == "/bundle.json" {
            let body = std::fs::read(&args.bundle).with_context(|| format!("reading {}", args.bundle.display()))?;
            respond(req, body, 200, "application/json")?;
        } else if let Some(file) = args.assets.as_deref().and_then(|root| resolve(root, &url)) {
            match std::fs::read(&file) {
                Ok(body) => respond(req, body, 200, content_type(&file))?,
                Err(_) => respond(req, b"not found\n".to_vec(), 404, "text/plain")?,
            }
        } else if args.assets.is_none() && (path == "/" || path == "/index.html") {
            respond(req, FALLBACK_INDEX.as_bytes().to_vec(), 200, "text/html; charset=utf-8")?;
        } else {
            respond(req, b"not found\n".to_vec(), 404, "text/plain")?;
        }
        if args.max_requests.is_some_and(|m| served + 1 >= m) {
            break;
        }
    }
    Ok(())
}
