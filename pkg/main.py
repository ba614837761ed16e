# main.py

"""
Entry point of the ndk-svm command-line toolkit.

Usage:
    python main.py --help
    python main.py featurize --corpus texts/ --labels labels.tsv --out data/run
    python main.py train --train data/run.train.svm --models-dir models/ndk --kernel ndk
    python main.py eval --models-dir models/ndk --test data/run.test.svm
"""

from app.cli import cli

if __name__ == "__main__":
    cli(prog_name="ndk-svm")  # pylint: disable=no-value-for-parameter
