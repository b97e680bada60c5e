from flask import Flask, request
import subprocess

app = Flask(__name__)


@app.route('/execute')
def executeCommand():
    command = request.args.get('command')
    subprocess.call(command, shell=True)
    return command
