//! The H-LPS round state machine.
//!
//! One round runs, in order: every participant obfuscates its own position
//! and broadcasts it to the group, the group elects the member with the
//! lowest privacy requirement as query user (QU), the QU computes the final
//! obfuscated location as the centroid of all broadcast positions, sends one
//! query to the provider, and forwards the provider's response to every
//! other participant. [`run_round`] executes the whole sequence and records
//! every send in a trace, so a round with N participants always produces
//! exactly `2N + 1` sends: N broadcasts, 1 query, 1 response, N - 1
//! forwards.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use rand::Rng;

use crate::geometry::Point2D;
use crate::math;

/// Wire-size class of a broadcast or query message, bytes.
pub const BROADCAST_BYTES: u64 = 64;
/// Wire-size class of the provider query, bytes.
pub const QUERY_BYTES: u64 = 64;
/// Fixed part of a response/forward message, bytes.
pub const RESPONSE_BASE_BYTES: u64 = 64;
/// Per-POI increment of a response/forward message, bytes.
pub const RESPONSE_POI_BYTES: u64 = 16;

/// Participant identifier, unique within a scenario.
///
/// Id 0 is reserved for the LBS provider ([`PROVIDER_ID`]); scenario
/// generation numbers users from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(pub u64);

/// Reserved identifier for the LBS provider in message traces.
pub const PROVIDER_ID: UserId = UserId(0);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A privacy requirement in [0, 1]; higher means a stronger requirement.
///
/// The member with the *lowest* requirement is elected QU, so it is the one
/// willing to talk to the provider.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PrivacyLevel(f64);

impl PrivacyLevel {
    pub fn new(p: f64) -> Result<Self, ProtocolError> {
        if p.is_finite() && (0.0..=1.0).contains(&p) {
            Ok(Self(p))
        } else {
            Err(ProtocolError::InvalidPrivacyLevel(p))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Short token naming the requested service, e.g. "restaurant".
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ServiceTag(pub String);

impl fmt::Display for ServiceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A protocol participant.
#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub id: UserId,
    pub true_position: Point2D,
    pub privacy: PrivacyLevel,
    /// Radius of the circle around the true position within which results
    /// are useful to this user, metres.
    pub interest_radius: f64,
}

/// Peer-stage obfuscation noise: the displacement is drawn uniformly from a
/// disk whose radius grows linearly with the privacy requirement,
/// `rho(p) = rho_min + p * (rho_max - rho_min)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub rho_min: f64,
    pub rho_max: f64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let ok = self.rho_min.is_finite()
            && self.rho_max.is_finite()
            && self.rho_min >= 0.0
            && self.rho_min <= self.rho_max;
        if ok {
            Ok(())
        } else {
            Err(ProtocolError::BadNoiseConfig {
                rho_min: self.rho_min,
                rho_max: self.rho_max,
            })
        }
    }

    /// Disk radius for privacy level `p`.
    pub fn radius_for(&self, privacy: PrivacyLevel) -> f64 {
        self.rho_min + privacy.value() * (self.rho_max - self.rho_min)
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        // Peer-stage blur is deliberately small; it only protects against
        // other group members, not the provider.
        Self {
            rho_min: 5.0,
            rho_max: 50.0,
        }
    }
}

/// The message each user broadcasts to the group: sender id, obfuscated
/// position, requested service, and privacy requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastMessage {
    pub sender: UserId,
    pub obfuscated_position: Point2D,
    pub service: ServiceTag,
    pub privacy: PrivacyLevel,
}

/// The single query the QU sends to the provider.
#[derive(Debug, Clone, PartialEq)]
pub struct LbsQuery {
    pub qu: UserId,
    pub query_position: Point2D,
    pub service: ServiceTag,
}

/// A catalogued place returned in provider responses.
#[derive(Debug, Clone, PartialEq)]
pub struct PoiRecord {
    pub id: u64,
    pub position: Point2D,
    pub category: ServiceTag,
}

/// The provider's response to an [`LbsQuery`].
#[derive(Debug, Clone, PartialEq)]
pub struct LbsResponse {
    pub provider: UserId,
    pub qu: UserId,
    pub payload: Vec<PoiRecord>,
}

/// One forwarded copy of the provider response, QU to peer.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardedResponse {
    pub qu: UserId,
    pub recipient: UserId,
    pub payload: Vec<PoiRecord>,
}

/// Anything able to answer an [`LbsQuery`]; implemented by the simulator's
/// POI-database provider model.
pub trait LbsProvider {
    fn serve_query(&self, query: &LbsQuery) -> LbsResponse;
}

/// Message classes appearing in a round trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Broadcast,
    Query,
    Response,
    Forward,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Broadcast => "broadcast",
            MessageKind::Query => "query",
            MessageKind::Response => "response",
            MessageKind::Forward => "forward",
        }
    }
}

/// One send recorded in a round trace: who sent what to whom, and the
/// message's wire-size class.
#[derive(Debug, Clone, PartialEq)]
pub struct SentMessage {
    pub kind: MessageKind,
    pub sender: UserId,
    pub receivers: Vec<UserId>,
    pub bytes: u64,
}

/// Everything needed to configure one round beyond the participants.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundConfig {
    pub noise: NoiseConfig,
    pub service: ServiceTag,
}

/// Full trace of one protocol round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub participants: Vec<UserId>,
    /// Every send of the round, in protocol order: broadcasts, query,
    /// response, forwards.
    pub messages: Vec<SentMessage>,
    pub elected_qu: UserId,
    pub final_location: Point2D,
    /// The POI payload each participant ends the round with; identical for
    /// everyone, QU included.
    pub per_user_payloads: alloc::collections::BTreeMap<UserId, Vec<PoiRecord>>,
}

/// Errors from protocol operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProtocolError {
    BadNoiseConfig { rho_min: f64, rho_max: f64 },
    NoParticipants,
    DuplicateSender(UserId),
    QuNotInGroup(UserId),
    InvalidPrivacyLevel(f64),
}

impl fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolError::BadNoiseConfig { rho_min, rho_max } => {
                write!(f, "bad noise config: rho_min={rho_min}, rho_max={rho_max}")
            }
            ProtocolError::NoParticipants => write!(f, "no participants"),
            ProtocolError::DuplicateSender(id) => write!(f, "duplicate sender id {id}"),
            ProtocolError::QuNotInGroup(id) => write!(f, "QU {id} is not in the group"),
            ProtocolError::InvalidPrivacyLevel(p) => {
                write!(f, "privacy level {p} outside [0, 1]")
            }
        }
    }
}

impl core::error::Error for ProtocolError {}

/// Displaces `true_position` by a point drawn uniformly from the disk of
/// radius `noise.radius_for(privacy)`.
///
/// The displacement never exceeds that radius, so peers learn the true
/// position only up to the blur the user asked for.
pub fn obfuscate<R: Rng + ?Sized>(
    true_position: Point2D,
    privacy: PrivacyLevel,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<Point2D, ProtocolError> {
    noise.validate()?;
    let rho = noise.radius_for(privacy);
    // Uniform over the disk: radius scales with sqrt(u), angle uniform.
    let r = rho * math::sqrt(rng.random::<f64>());
    let theta = 2.0 * PI * rng.random::<f64>();
    Ok(Point2D::new(
        true_position.x + r * math::cos(theta),
        true_position.y + r * math::sin(theta),
    ))
}

/// Elects the sender with the lowest privacy requirement; ties break to the
/// smallest id.
pub fn elect_qu(messages: &[BroadcastMessage]) -> Result<UserId, ProtocolError> {
    if messages.is_empty() {
        return Err(ProtocolError::NoParticipants);
    }
    let mut seen = BTreeSet::new();
    for m in messages {
        if !seen.insert(m.sender) {
            return Err(ProtocolError::DuplicateSender(m.sender));
        }
    }
    let winner = messages
        .iter()
        .min_by(|a, b| {
            a.privacy
                .value()
                .total_cmp(&b.privacy.value())
                .then(a.sender.cmp(&b.sender))
        })
        .expect("nonempty");
    Ok(winner.sender)
}

/// The final obfuscated location: the centroid of all broadcast positions,
/// the QU's own included.
///
/// The least-squares line through the broadcast positions always passes
/// through their centroid, so this *is* the mean point on the regression
/// line; [`crate::geometry::ols_fit`] is kept for diagnostics.
pub fn final_location(messages: &[BroadcastMessage]) -> Result<Point2D, ProtocolError> {
    if messages.is_empty() {
        return Err(ProtocolError::NoParticipants);
    }
    let mut sx = 0.0;
    let mut sy = 0.0;
    for m in messages {
        sx += m.obfuscated_position.x;
        sy += m.obfuscated_position.y;
    }
    let n = messages.len() as f64;
    Ok(Point2D::new(sx / n, sy / n))
}

/// Assembles the provider query for an elected QU.
pub fn build_query(qu: UserId, final_location: Point2D, service: ServiceTag) -> LbsQuery {
    LbsQuery {
        qu,
        query_position: final_location,
        service,
    }
}

/// One forwarded response per participant other than the QU, each carrying
/// the identical payload.
pub fn forward(
    response: &LbsResponse,
    participants: &[UserId],
) -> Result<Vec<ForwardedResponse>, ProtocolError> {
    if !participants.contains(&response.qu) {
        return Err(ProtocolError::QuNotInGroup(response.qu));
    }
    Ok(participants
        .iter()
        .filter(|&&id| id != response.qu)
        .map(|&recipient| ForwardedResponse {
            qu: response.qu,
            recipient,
            payload: response.payload.clone(),
        })
        .collect())
}

/// Executes one full round: obfuscate-all, broadcast-all, elect, centroid,
/// query, serve, forward.
///
/// Deterministic in `rng`: the same participants, provider, config, and
/// random state produce a bit-identical [`RoundOutcome`].
pub fn run_round<P, R>(
    users: &[User],
    provider: &P,
    config: &RoundConfig,
    rng: &mut R,
) -> Result<RoundOutcome, ProtocolError>
where
    P: LbsProvider + ?Sized,
    R: Rng + ?Sized,
{
    if users.is_empty() {
        return Err(ProtocolError::NoParticipants);
    }
    let mut seen = BTreeSet::new();
    for u in users {
        if !seen.insert(u.id) {
            return Err(ProtocolError::DuplicateSender(u.id));
        }
    }
    let participants: Vec<UserId> = users.iter().map(|u| u.id).collect();

    let mut broadcasts = Vec::with_capacity(users.len());
    for user in users {
        let position = obfuscate(user.true_position, user.privacy, &config.noise, rng)?;
        broadcasts.push(BroadcastMessage {
            sender: user.id,
            obfuscated_position: position,
            service: config.service.clone(),
            privacy: user.privacy,
        });
    }

    let mut messages = Vec::with_capacity(2 * users.len() + 1);
    for b in &broadcasts {
        // Single-hop full mesh: every broadcast reaches all other members.
        messages.push(SentMessage {
            kind: MessageKind::Broadcast,
            sender: b.sender,
            receivers: participants
                .iter()
                .copied()
                .filter(|&id| id != b.sender)
                .collect(),
            bytes: BROADCAST_BYTES,
        });
    }

    let elected_qu = elect_qu(&broadcasts)?;
    let query_point = final_location(&broadcasts)?;
    let query = build_query(elected_qu, query_point, config.service.clone());
    messages.push(SentMessage {
        kind: MessageKind::Query,
        sender: elected_qu,
        receivers: alloc::vec![PROVIDER_ID],
        bytes: QUERY_BYTES,
    });

    let response = provider.serve_query(&query);
    let response_bytes = RESPONSE_BASE_BYTES + RESPONSE_POI_BYTES * response.payload.len() as u64;
    messages.push(SentMessage {
        kind: MessageKind::Response,
        sender: response.provider,
        receivers: alloc::vec![elected_qu],
        bytes: response_bytes,
    });

    let forwards = forward(&response, &participants)?;
    for fwd in &forwards {
        messages.push(SentMessage {
            kind: MessageKind::Forward,
            sender: fwd.qu,
            receivers: alloc::vec![fwd.recipient],
            bytes: response_bytes,
        });
    }

    let per_user_payloads = participants
        .iter()
        .map(|&id| (id, response.payload.clone()))
        .collect();

    Ok(RoundOutcome {
        participants,
        messages,
        elected_qu,
        final_location: query_point,
        per_user_payloads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tag(s: &str) -> ServiceTag {
        ServiceTag(s.to_string())
    }

    fn msg(id: u64, p: f64) -> BroadcastMessage {
        BroadcastMessage {
            sender: UserId(id),
            obfuscated_position: Point2D::new(id as f64, 0.0),
            service: tag("restaurant"),
            privacy: PrivacyLevel::new(p).unwrap(),
        }
    }

    #[test]
    fn obfuscation_endpoint_radii() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = NoiseConfig::default();
        let origin = Point2D::new(0.0, 0.0);
        for _ in 0..200 {
            let low = obfuscate(origin, PrivacyLevel::new(0.0).unwrap(), &noise, &mut rng).unwrap();
            assert!(crate::geometry::distance(origin, low) <= 5.0 + 1e-12);
            let high =
                obfuscate(origin, PrivacyLevel::new(1.0).unwrap(), &noise, &mut rng).unwrap();
            assert!(crate::geometry::distance(origin, high) <= 50.0 + 1e-12);
        }
    }

    #[test]
    fn obfuscation_rejects_bad_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad = NoiseConfig {
            rho_min: 60.0,
            rho_max: 50.0,
        };
        let got = obfuscate(
            Point2D::new(0.0, 0.0),
            PrivacyLevel::new(0.5).unwrap(),
            &bad,
            &mut rng,
        );
        assert!(matches!(got, Err(ProtocolError::BadNoiseConfig { .. })));
        let negative = NoiseConfig {
            rho_min: -1.0,
            rho_max: 50.0,
        };
        assert!(negative.validate().is_err());
    }

    #[test]
    fn election_picks_minimum() {
        let m = vec![msg(1, 0.3), msg(2, 0.7)];
        assert_eq!(elect_qu(&m).unwrap(), UserId(1));
    }

    #[test]
    fn election_tie_breaks_to_smallest_id() {
        let m = vec![msg(2, 0.4), msg(1, 0.4)];
        assert_eq!(elect_qu(&m).unwrap(), UserId(1));
    }

    #[test]
    fn election_rejects_empty_and_duplicates() {
        assert_eq!(elect_qu(&[]), Err(ProtocolError::NoParticipants));
        let m = vec![msg(3, 0.1), msg(3, 0.2)];
        assert_eq!(elect_qu(&m), Err(ProtocolError::DuplicateSender(UserId(3))));
    }

    #[test]
    fn final_location_collinear_mean() {
        let mut m = vec![msg(1, 0.5), msg(2, 0.5), msg(3, 0.5)];
        m[0].obfuscated_position = Point2D::new(0.0, 0.0);
        m[1].obfuscated_position = Point2D::new(10.0, 0.0);
        m[2].obfuscated_position = Point2D::new(20.0, 0.0);
        assert_eq!(final_location(&m).unwrap(), Point2D::new(10.0, 0.0));
    }

    #[test]
    fn final_location_single_participant() {
        let mut m = vec![msg(4, 0.2)];
        m[0].obfuscated_position = Point2D::new(4.0, 9.0);
        assert_eq!(final_location(&m).unwrap(), Point2D::new(4.0, 9.0));
        assert_eq!(final_location(&[]), Err(ProtocolError::NoParticipants));
    }

    #[test]
    fn build_query_transcribes_fields() {
        let q = build_query(UserId(3), Point2D::new(1.0, 2.0), tag("bank"));
        assert_eq!(q.qu, UserId(3));
        assert_eq!(q.query_position, Point2D::new(1.0, 2.0));
        assert_eq!(q.service, tag("bank"));
    }

    #[test]
    fn forward_fan_out() {
        let response = LbsResponse {
            provider: PROVIDER_ID,
            qu: UserId(2),
            payload: vec![],
        };
        let alone = forward(&response, &[UserId(2)]).unwrap();
        assert!(alone.is_empty());

        let pair = forward(&response, &[UserId(1), UserId(2)]).unwrap();
        assert_eq!(pair.len(), 1);
        assert_eq!(pair[0].recipient, UserId(1));

        let five: Vec<UserId> = (1..=5).map(UserId).collect();
        let fwds = forward(&response, &five).unwrap();
        assert_eq!(fwds.len(), 4);
        assert!(fwds.iter().all(|f| f.payload == response.payload));

        let missing = forward(&response, &[UserId(1), UserId(3)]);
        assert_eq!(missing, Err(ProtocolError::QuNotInGroup(UserId(2))));
    }
}
