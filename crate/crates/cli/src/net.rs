//! TCP links between the three parties.
//!
//! A dialing party sends its role code as a single byte; the listener uses
//! it to tell its peers apart.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::time::{Duration, Instant};

use pgc_core::abort::Role;

use crate::{usage, CliError};

/// Parses `role=host:port`.
pub fn parse_connect(s: &str) -> Result<(Role, String), CliError> {
    let (r, addr) = s
        .split_once('=')
        .ok_or_else(|| usage(format!("--connect `{s}` must look like role=host:port")))?;
    let role = Role::parse(r).ok_or_else(|| usage(format!("unknown role `{r}` in --connect")))?;
    Ok((role, addr.to_string()))
}

fn dial(addr: &str, me: Role, deadline: Instant) -> Result<TcpStream, CliError> {
    loop {
        match TcpStream::connect(addr) {
            Ok(mut s) => {
                s.write_all(&[me.code()])?;
                return Ok(s);
            }
            Err(e) if Instant::now() >= deadline => return Err(e.into()),
            Err(_) => std::thread::sleep(Duration::from_millis(50)),
        }
    }
}

/// Dials every `connect` peer and accepts the rest on `listen`.
pub fn connect_peers(
    me: Role,
    listen: Option<&str>,
    connect: &[(Role, String)],
    timeout: Duration,
) -> Result<HashMap<Role, TcpStream>, CliError> {
    let peers: Vec<Role> = [Role::Generator, Role::Evaluator, Role::Cloud]
        .into_iter()
        .filter(|&r| r != me)
        .collect();
    let deadline = Instant::now() + timeout;
    let listener = listen.map(TcpListener::bind).transpose()?;
    let mut links = HashMap::new();
    for (role, addr) in connect {
        if !peers.contains(role) || links.contains_key(role) {
            return Err(usage(format!("cannot connect {me} to {role} twice or to itself")));
        }
        links.insert(*role, dial(addr, me, deadline)?);
    }
    if links.len() < peers.len() {
        let listener = listener.ok_or_else(|| usage("some peers are not dialed and --listen is missing"))?;
        listener.set_nonblocking(true)?;
        while links.len() < peers.len() {
            match listener.accept() {
                Ok((mut s, _)) => {
                    s.set_nonblocking(false)?;
                    s.set_read_timeout(Some(timeout))?;
                    let mut b = [0u8];
                    s.read_exact(&mut b)?;
                    match Role::from_code(b[0]) {
                        Some(r) if peers.contains(&r) && !links.contains_key(&r) => {
                            links.insert(r, s);
                        }
                        _ => return Err(usage(format!("unexpected peer with role byte {}", b[0]))),
                    }
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Err(usage("timed out waiting for peers"));
                    }
                    std::thread::sleep(Duration::from_millis(20));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(links)
}
