#!/usr/bin/env python3
"""
Setup script for the ice-layer graph network
"""

import os
import subprocess
import sys


def install_requirements():
    """Install Python dependencies"""
    print("Installing Python dependencies...")
    try:
        subprocess.check_call([sys.executable, "-m", "pip", "install", "-r", "requirements.txt"])
        print("✓ Dependencies installed successfully")
    except subprocess.CalledProcessError as e:
        print(f"✗ Failed to install dependencies: {e}")
        return False
    return True


def create_directories():
    """Create data, output and log directories"""
    print("Creating project directories...")
    for directory in ["data", "runs", "logs"]:
        os.makedirs(directory, exist_ok=True)
        print(f"✓ Created {directory}/ directory")


def create_env_file():
    if os.path.exists(".env") or not os.path.exists(".env.example"):
        return
    with open(".env.example", "r") as src, open(".env", "w") as dst:
        dst.write(src.read())
    print("✓ Created .env from .env.example")


def main():
    print("Setting up the ice-layer graph network...")
    print("=" * 50)

    if not install_requirements():
        print("Setup failed. Please check the error messages above.")
        return False

    create_directories()
    create_env_file()

    print("\n" + "=" * 50)
    print("✓ Setup completed successfully!")
    print("\nNext steps:")
    print("1. Generate a synthetic dataset: python main.py synth --n 40 --out data")
    print("2. Check every backward rule:    python main.py gradcheck")
    print("3. Run the trial protocol:       python main.py trials --config configs/psage_lstm.yaml")

    return True


if __name__ == "__main__":
    main()
