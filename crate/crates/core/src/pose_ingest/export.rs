use serde::Deserialize;

use super::{RawKeypoint, RawPoseFrame, N_POSE};
use crate::error::{Error, Result};

const VALUES_PER_PERSON: usize = N_POSE * 3;

#[derive(Deserialize)]
struct ExportFrame {
    frame_index: u64,
    people: Vec<ExportPerson>,
}

#[derive(Deserialize)]
struct ExportPerson {
    pose_keypoints_2d: Vec<f64>,
}

/// Frames recovered from one export document.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedExport {
    pub frames: Vec<RawPoseFrame>,
    /// Frames in which no person was detected.
    pub skipped_empty: usize,
}

/// Parse one clip's keypoint export.
///
/// The document is a JSON array of `{"frame_index", "people"}` objects where
/// each person carries `pose_keypoints_2d`, 54 numbers laid out as 18
/// `[x, y, conf]` triples. Extra fields are ignored. Frames without a person
/// are skipped and counted; a frame with more than one person is rejected.
pub fn parse_keypoint_export(document: &str, clip_id: &str) -> Result<ParsedExport> {
    let raw: Vec<ExportFrame> = serde_json::from_str(document).map_err(|e| {
        Error::parse(
            format_args!("clip `{clip_id}` line {} column {}", e.line(), e.column()),
            e,
        )
    })?;

    let mut frames = Vec::with_capacity(raw.len());
    let mut skipped_empty = 0;
    let mut last_index: Option<u64> = None;
    for (pos, frame) in raw.into_iter().enumerate() {
        let ctx = || format!("clip `{clip_id}` frame {} (entry {pos})", frame.frame_index);
        if let Some(prev) = last_index {
            if frame.frame_index <= prev {
                return Err(Error::parse(
                    ctx(),
                    format_args!("frame_index not increasing (previous {prev})"),
                ));
            }
        }
        last_index = Some(frame.frame_index);

        let person = match frame.people.as_slice() {
            [] => {
                skipped_empty += 1;
                continue;
            }
            [person] => person,
            people => {
                return Err(Error::Constraint(format!(
                    "{}: {} people detected, at most one allowed",
                    ctx(),
                    people.len()
                )))
            }
        };

        let values = &person.pose_keypoints_2d;
        if values.len() != VALUES_PER_PERSON {
            return Err(Error::parse(
                ctx(),
                format_args!(
                    "pose_keypoints_2d has {} values, expected {VALUES_PER_PERSON}",
                    values.len()
                ),
            ));
        }
        let mut keypoints = [RawKeypoint {
            x: 0.0,
            y: 0.0,
            conf: 0.0,
        }; N_POSE];
        for (k, slot) in keypoints.iter_mut().enumerate() {
            let t = &values[3 * k..3 * k + 3];
            *slot = RawKeypoint::new(t[0], t[1], t[2])
                .map_err(|e| Error::parse(format!("{} keypoint {k}", ctx()), e))?;
        }
        frames.push(RawPoseFrame {
            frame_index: frame.frame_index,
            keypoints,
        });
    }
    Ok(ParsedExport {
        frames,
        skipped_empty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn person(offset: f64) -> String {
        let vals: Vec<String> = (0..N_POSE)
            .flat_map(|k| {
                [
                    format!("{}", k as f64 + offset),
                    format!("{}", k as f64 * 2.0),
                    "0.9".to_string(),
                ]
            })
            .collect();
        format!("{{\"pose_keypoints_2d\":[{}]}}", vals.join(","))
    }

    fn doc(frames: &[(u64, usize)]) -> String {
        let body: Vec<String> = frames
            .iter()
            .map(|&(idx, n)| {
                let people: Vec<String> = (0..n).map(|p| person(p as f64)).collect();
                format!(
                    "{{\"frame_index\":{idx},\"people\":[{}]}}",
                    people.join(",")
                )
            })
            .collect();
        format!("[{}]", body.join(",\n"))
    }

    #[test]
    fn three_single_person_frames() {
        let parsed = parse_keypoint_export(&doc(&[(0, 1), (1, 1), (2, 1)]), "c").unwrap();
        assert_eq!(parsed.frames.len(), 3);
        assert_eq!(parsed.skipped_empty, 0);
        let idx: Vec<u64> = parsed.frames.iter().map(|f| f.frame_index).collect();
        assert_eq!(idx, vec![0, 1, 2]);
        assert_eq!(parsed.frames[0].keypoints[3].x, 3.0);
        assert_eq!(parsed.frames[0].keypoints[3].y, 6.0);
        assert_eq!(parsed.frames[0].keypoints[3].conf, 0.9);
    }

    #[test]
    fn personless_frame_is_skipped_and_counted() {
        let parsed = parse_keypoint_export(&doc(&[(0, 1), (1, 0), (2, 1)]), "c").unwrap();
        let idx: Vec<u64> = parsed.frames.iter().map(|f| f.frame_index).collect();
        assert_eq!(idx, vec![0, 2]);
        assert_eq!(parsed.skipped_empty, 1);
    }

    #[test]
    fn two_people_is_a_constraint_error() {
        let err = parse_keypoint_export(&doc(&[(0, 1), (1, 2)]), "clipA").unwrap_err();
        match err {
            Error::Constraint(msg) => assert!(msg.contains("frame 1"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_line() {
        let err =
            parse_keypoint_export("[\n{\"frame_index\": 0,\n \"people\": [}", "c").unwrap_err();
        match err {
            Error::Parse { context, .. } => assert!(context.contains("line 3"), "{context}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_arity_and_bad_confidence() {
        let short = r#"[{"frame_index":0,"people":[{"pose_keypoints_2d":[1,2,0.5]}]}]"#;
        assert!(matches!(
            parse_keypoint_export(short, "c"),
            Err(Error::Parse { .. })
        ));

        let mut vals = vec!["1"; VALUES_PER_PERSON];
        vals[5] = "1.5";
        let bad = format!(
            r#"[{{"frame_index":0,"people":[{{"pose_keypoints_2d":[{}]}}]}}]"#,
            vals.join(",")
        );
        let err = parse_keypoint_export(&bad, "c").unwrap_err();
        assert!(err.to_string().contains("keypoint 1"), "{err}");
    }

    #[test]
    fn overflowing_number_is_rejected() {
        let mut vals = vec!["1"; VALUES_PER_PERSON];
        vals[0] = "1e400";
        let bad = format!(
            r#"[{{"frame_index":0,"people":[{{"pose_keypoints_2d":[{}]}}]}}]"#,
            vals.join(",")
        );
        assert!(parse_keypoint_export(&bad, "c").is_err());
    }

    #[test]
    fn non_increasing_frame_index_is_rejected() {
        assert!(parse_keypoint_export(&doc(&[(0, 1), (0, 1)]), "c").is_err());
    }

    #[test]
    fn extra_fields_are_ignored() {
        let d = doc(&[(0, 1)]).replace("\"people\"", "\"version\":1.3,\"people\"");
        assert_eq!(parse_keypoint_export(&d, "c").unwrap().frames.len(), 1);
    }
}
