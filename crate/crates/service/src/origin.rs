//! Classifies a submission as local or remote from its connection.

use std::net::IpAddr;

use axum::http::{HeaderMap, HeaderName};
use ipnet::IpNet;
use ministack_core::orchestrator::Origin;

#[derive(Debug, Clone, Default)]
pub struct OriginRules {
    pub local_cidrs: Vec<IpNet>,
    pub gateway_header: Option<HeaderName>,
}

impl OriginRules {
    pub fn new(local_cidrs: Vec<IpNet>, gateway_header: Option<&str>) -> Self {
        OriginRules { local_cidrs, gateway_header: gateway_header.and_then(|h| HeaderName::try_from(h).ok()) }
    }

    pub fn detect(&self, peer: IpAddr, headers: &HeaderMap) -> Origin {
        let peer = peer.to_canonical();
        let via_gateway = self.gateway_header.as_ref().is_some_and(|h| headers.contains_key(h));
        if via_gateway || self.local_cidrs.iter().any(|net| net.contains(&peer)) {
            Origin::Local
        } else {
            Origin::Remote
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules() -> OriginRules {
        OriginRules::new(vec!["10.0.0.0/8".parse().unwrap(), "fd00::/8".parse().unwrap()], Some("x-gw"))
    }

    #[test]
    fn cidr_and_header() {
        let none = HeaderMap::new();
        let r = rules();
        assert_eq!(r.detect("10.1.2.3".parse().unwrap(), &none), Origin::Local);
        assert_eq!(r.detect("::ffff:10.9.9.9".parse().unwrap(), &none), Origin::Local);
        assert_eq!(r.detect("fd12::1".parse().unwrap(), &none), Origin::Local);
        assert_eq!(r.detect("8.8.8.8".parse().unwrap(), &none), Origin::Remote);
        assert_eq!(r.detect("11.0.0.1".parse().unwrap(), &none), Origin::Remote);
        let mut gw = HeaderMap::new();
        gw.insert("x-gw", "1".parse().unwrap());
        assert_eq!(r.detect("8.8.8.8".parse().unwrap(), &gw), Origin::Local);
        assert_eq!(OriginRules::new(vec![], None).detect("8.8.8.8".parse().unwrap(), &gw), Origin::Remote);
    }

    #[test]
    fn boost_is_capped() {
        assert_eq!(Origin::Local.boost(9), 9);
        assert_eq!(Origin::Local.boost(4), 5);
        assert_eq!(Origin::Remote.boost(4), 4);
    }
}
