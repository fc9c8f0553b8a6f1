"""procf-predictor command line: train a model file, serve it over stdio."""

import argparse
import sys

from procf_predictor.service import serve, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="procf-predictor",
        description="Random-forest outcome predictor speaking the procf wire protocol.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit a model on an event log")
    p_train.add_argument("--log", required=True)
    p_train.add_argument("--schema", required=True)
    p_train.add_argument("--out", required=True, help="model file to write")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--trees", type=int, default=100)

    p_serve = sub.add_parser("serve", help="answer predictions on stdin/stdout")
    p_serve.add_argument("model", help="model file written by train")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train":
        manifest = train(args.log, args.schema, args.out,
                         seed=args.seed, n_estimators=args.trees)
        print(f"trained on {manifest['n_training_rows']} prefix rows; "
              f"labels: {', '.join(manifest['labels'])}", file=sys.stderr)
        return 0
    return serve(args.model)


if __name__ == "__main__":
    sys.exit(main())
