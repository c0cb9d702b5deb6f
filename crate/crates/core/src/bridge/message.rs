use serde::Serialize;
use serde_json::{Map, Value};

use super::BridgeError;

/// The rosbridge v2 operations used by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Advertise,
    Unadvertise,
    Publish,
    Subscribe,
    Unsubscribe,
}

impl Op {
    pub fn as_str(&self) -> &'static str {
        match self {
            Op::Advertise => "advertise",
            Op::Unadvertise => "unadvertise",
            Op::Publish => "publish",
            Op::Subscribe => "subscribe",
            Op::Unsubscribe => "unsubscribe",
        }
    }

    fn parse(s: &str) -> Option<Op> {
        Some(match s {
            "advertise" => Op::Advertise,
            "unadvertise" => Op::Unadvertise,
            "publish" => Op::Publish,
            "subscribe" => Op::Subscribe,
            "unsubscribe" => Op::Unsubscribe,
            _ => return None,
        })
    }
}

/// One rosbridge envelope. Fields are private so every value satisfies the
/// envelope invariants; build through the constructors.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeMessage {
    op: Op,
    topic: String,
    msg_type: Option<String>,
    payload: Option<Value>,
    id: Option<String>,
}

/// Wire layout; declaration order fixes key order in the output.
#[derive(Serialize)]
struct Wire<'a> {
    op: Op,
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<&'a str>,
    topic: &'a str,
    #[serde(rename = "type", skip_serializing_if = "Option::is_none")]
    msg_type: Option<&'a str>,
    #[serde(rename = "msg", skip_serializing_if = "Option::is_none")]
    payload: Option<&'a Value>,
}

impl BridgeMessage {
    /// Validating constructor shared by the op-specific helpers.
    pub fn new(
        op: Op,
        topic: impl Into<String>,
        msg_type: Option<String>,
        payload: Option<Value>,
        id: Option<String>,
    ) -> Result<Self, BridgeError> {
        let topic = topic.into();
        if topic.is_empty() || !topic.starts_with('/') {
            return Err(BridgeError::InvalidTopic(topic));
        }
        match op {
            Op::Publish if payload.is_none() => return Err(BridgeError::MissingField("msg")),
            Op::Advertise | Op::Subscribe if msg_type.as_deref().is_none_or(str::is_empty) => {
                return Err(BridgeError::MissingField("type"))
            }
            _ => {}
        }
        Ok(Self {
            op,
            topic,
            msg_type,
            payload,
            id,
        })
    }

    pub fn publish(topic: impl Into<String>, payload: Value) -> Result<Self, BridgeError> {
        Self::new(Op::Publish, topic, None, Some(payload), None)
    }

    pub fn advertise(topic: impl Into<String>, msg_type: impl Into<String>) -> Result<Self, BridgeError> {
        Self::new(Op::Advertise, topic, Some(msg_type.into()), None, None)
    }

    pub fn subscribe(topic: impl Into<String>, msg_type: impl Into<String>) -> Result<Self, BridgeError> {
        Self::new(Op::Subscribe, topic, Some(msg_type.into()), None, None)
    }

    pub fn unsubscribe(topic: impl Into<String>) -> Result<Self, BridgeError> {
        Self::new(Op::Unsubscribe, topic, None, None, None)
    }

    pub fn unadvertise(topic: impl Into<String>) -> Result<Self, BridgeError> {
        Self::new(Op::Unadvertise, topic, None, None, None)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn op(&self) -> Op {
        self.op
    }

    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn msg_type(&self) -> Option<&str> {
        self.msg_type.as_deref()
    }

    pub fn payload(&self) -> Option<&Value> {
        self.payload.as_ref()
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }

    /// Single-line UTF-8 JSON with keys in the order `op, id, topic, type, msg`.
    /// Floats use the shortest representation that parses back to the same
    /// `f64`.
    pub fn encode(&self) -> String {
        let wire = Wire {
            op: self.op,
            id: self.id.as_deref(),
            topic: &self.topic,
            msg_type: self.msg_type.as_deref(),
            payload: self.payload.as_ref(),
        };
        serde_json::to_string(&wire).expect("envelope serialization cannot fail")
    }

    /// Parses a rosbridge v2 envelope. Unknown keys are ignored.
    pub fn decode(bytes: &[u8]) -> Result<Self, BridgeError> {
        let value: Value = serde_json::from_slice(bytes).map_err(|e| BridgeError::Decode(e.to_string()))?;
        let Value::Object(mut obj) = value else {
            return Err(BridgeError::Decode("envelope is not a JSON object".into()));
        };
        let op_str = take_string(&mut obj, "op")?.ok_or(BridgeError::MissingField("op"))?;
        let op = Op::parse(&op_str).ok_or(BridgeError::UnsupportedOp(op_str))?;
        let topic = take_string(&mut obj, "topic")?.ok_or(BridgeError::MissingField("topic"))?;
        let msg_type = take_string(&mut obj, "type")?;
        let id = take_string(&mut obj, "id")?;
        let payload = obj.remove("msg");
        Self::new(op, topic, msg_type, payload, id)
    }
}

fn take_string(obj: &mut Map<String, Value>, key: &'static str) -> Result<Option<String>, BridgeError> {
    match obj.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(BridgeError::Schema {
            field: key.to_string(),
            reason: "expected a string".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn publish_bool_wire_form() {
        let m = BridgeMessage::publish("/ue5/capture", json!({"data": true})).unwrap();
        assert_eq!(
            m.encode(),
            r#"{"op":"publish","topic":"/ue5/capture","msg":{"data":true}}"#
        );
    }

    #[test]
    fn advertise_requires_type() {
        assert_eq!(
            BridgeMessage::new(Op::Advertise, "/x", None, None, None),
            Err(BridgeError::MissingField("type"))
        );
        assert!(BridgeMessage::advertise("/x", "std_msgs/Bool").is_ok());
    }

    #[test]
    fn topic_must_be_absolute() {
        assert!(matches!(
            BridgeMessage::publish("joint_states", json!({})),
            Err(BridgeError::InvalidTopic(_))
        ));
        assert!(BridgeMessage::publish("", json!({})).is_err());
    }

    #[test]
    fn unknown_op_is_reported() {
        assert_eq!(
            BridgeMessage::decode(br#"{"op":"nonsense"}"#),
            Err(BridgeError::UnsupportedOp("nonsense".into()))
        );
    }

    #[test]
    fn missing_fields_are_named() {
        assert_eq!(
            BridgeMessage::decode(br#"{"topic":"/a"}"#),
            Err(BridgeError::MissingField("op"))
        );
        assert_eq!(
            BridgeMessage::decode(br#"{"op":"publish","msg":{}}"#),
            Err(BridgeError::MissingField("topic"))
        );
        assert_eq!(
            BridgeMessage::decode(br#"{"op":"publish","topic":"/a"}"#),
            Err(BridgeError::MissingField("msg"))
        );
    }

    #[test]
    fn invalid_json_is_decode_error() {
        assert!(matches!(
            BridgeMessage::decode(b"{not json"),
            Err(BridgeError::Decode(_))
        ));
    }

    #[test]
    fn extra_fields_are_ignored() {
        let m = BridgeMessage::decode(
            br#"{"op":"subscribe","topic":"/a","type":"std_msgs/Bool","throttle_rate":0,"queue_length":1}"#,
        )
        .unwrap();
        assert_eq!(m.op(), Op::Subscribe);
        assert_eq!(m.msg_type(), Some("std_msgs/Bool"));
    }

    #[test]
    fn radians_survive_the_wire() {
        let x = 0.1f64 + 0.2;
        let m = BridgeMessage::publish("/q", json!({"position": [x, -std::f64::consts::PI]})).unwrap();
        let back = BridgeMessage::decode(m.encode().as_bytes()).unwrap();
        let p = back.payload().unwrap()["position"].as_array().unwrap();
        assert_eq!(p[0].as_f64().unwrap().to_bits(), x.to_bits());
        assert!(m.encode().contains("0.30000000000000004"));
    }
}
