use super::{HandshakeError, SuiteSpec, Variant};
use crate::registry::{kem_step_times, DeviceProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Client,
    Server,
}

/// The three compute steps of a handshake, in protocol order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Step {
    ClientInit,
    ServerRespond,
    ClientFinish,
}

impl Step {
    pub fn role(self) -> Role {
        match self {
            Step::ServerRespond => Role::Server,
            Step::ClientInit | Step::ClientFinish => Role::Client,
        }
    }
}

fn fixed_step_name(variant: Variant, step: Step) -> Option<&'static str> {
    match (variant, step) {
        (Variant::Ntor, Step::ClientInit) => Some("ntor_client_create"),
        (Variant::Ntor, Step::ClientFinish) => Some("ntor_client_handshake"),
        (Variant::Ntor, Step::ServerRespond) => Some("ntor_server_total"),
        (Variant::NtorV3, Step::ClientInit) | (Variant::HsNtor, Step::ClientInit) => None,
        (Variant::NtorV3, Step::ClientFinish) => Some("ntorv3_client"),
        (Variant::NtorV3, Step::ServerRespond) => Some("ntorv3_server"),
        (Variant::HsNtor, Step::ClientFinish) => Some("hs_ntor_client"),
        (Variant::HsNtor, Step::ServerRespond) => Some("hs_ntor_server"),
    }
}

/// Milliseconds of one handshake step on `device`.
///
/// Fixed variant cost plus, for every key-exchange member of the suite, the
/// matching KEM operation: keygen at init, encaps at the relay, decaps at
/// finish.
pub fn step_cost(suite: &SuiteSpec, step: Step, device: &DeviceProfile) -> Result<f64, HandshakeError> {
    let mut ms = match fixed_step_name(suite.variant, step) {
        Some(name) => device.fixed_cost(name)?,
        None => 0.0,
    };
    for scheme in suite.members() {
        let t = kem_step_times(device, scheme)?;
        ms += match step {
            Step::ClientInit => t.keygen_ms,
            Step::ServerRespond => t.encaps_ms,
            Step::ClientFinish => t.decaps_ms,
        };
    }
    Ok(ms)
}

/// Milliseconds one side spends on a handshake.
pub fn cost_of(suite: &SuiteSpec, role: Role, device: &DeviceProfile) -> Result<f64, HandshakeError> {
    match role {
        Role::Client => Ok(step_cost(suite, Step::ClientInit, device)? + step_cost(suite, Step::ClientFinish, device)?),
        Role::Server => step_cost(suite, Step::ServerRespond, device),
    }
}

#[cfg(test)]
mod tests {
    use super::super::suite_by_id;
    use super::*;
    use crate::registry::{hybrid_exchange_time, ProfileSet, RegistryError};

    #[test]
    fn fixed_part_of_ntor_v3() {
        let p = ProfileSet::default_set();
        let suite = suite_by_id(&p, "ntor-v3").unwrap();
        let dev = p.device("client-x86").unwrap().fixed_costs_only();
        assert!((cost_of(&suite, Role::Client, &dev).unwrap() - 0.67).abs() < 1e-12);
        assert!((cost_of(&suite, Role::Server, &dev).unwrap() - 0.63).abs() < 1e-12);
    }

    #[test]
    fn hybrid_adds_one_exchange_per_member() {
        let p = ProfileSet::default_set();
        let dev = p.device("pi5").unwrap();
        let hybrid = suite_by_id(&p, "hybrid-ml-kem-512").unwrap();
        let total = cost_of(&hybrid, Role::Client, dev).unwrap() + cost_of(&hybrid, Role::Server, dev).unwrap();
        let ke = hybrid_exchange_time(dev, p.scheme("x25519").unwrap(), p.scheme("ml-kem-512").unwrap()).unwrap();
        assert!((total - (3.0 + ke)).abs() < 1e-9);
        assert!((ke - 0.328).abs() < 0.001);
    }

    #[test]
    fn missing_entries_are_errors() {
        let p = ProfileSet::default_set();
        let suite = suite_by_id(&p, "hybrid-ml-kem-768").unwrap();
        let err = cost_of(&suite, Role::Client, p.device("client-x86").unwrap()).unwrap_err();
        assert!(matches!(
            err,
            HandshakeError::Registry(RegistryError::MissingRate { .. })
        ));
        let bare = p.device("oqs-x86-ref").unwrap();
        let ntor = suite_by_id(&p, "ntor").unwrap();
        assert!(matches!(
            cost_of(&ntor, Role::Server, bare),
            Err(HandshakeError::Registry(RegistryError::MissingFixedCost { .. }))
        ));
    }
}
